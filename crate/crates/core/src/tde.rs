//! Time-delay estimation: the delayed input/acceleration history and the
//! lumped-uncertainty estimate `N_hat = tau(t-L) - M_nom * ddq(t-L)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};

/// One entry of the delayed history: the input applied from time `t` and the
/// acceleration it produced over the following control period.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySample {
    pub t: f64,
    pub tau: DVector<f64>,
    pub ddq: DVector<f64>,
}

/// Bounded FIFO of [`DelaySample`]s keyed by timestamp.
///
/// The control loop runs at a fixed period equal to the delay `L`, so lookup
/// matches the sample whose timestamp falls within half a period of `t - L`;
/// no interpolation. Before `t >= L` the zero sample is returned, which makes
/// the controller start on desired-dynamics plus adaptive action alone.
#[derive(Debug, Clone)]
pub struct DelayLine {
    delay: f64,
    dim: usize,
    buffer: Vec<DelaySample>,
}

impl DelayLine {
    pub fn new(delay: f64, dim: usize) -> Result<Self> {
        if delay <= 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "delay must be positive, got {delay}"
            )));
        }
        Ok(Self {
            delay,
            dim,
            buffer: Vec::new(),
        })
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Appends a sample. Timestamps must be strictly increasing; entries older
    /// than `t - 2L` are evicted.
    pub fn push(&mut self, sample: DelaySample) -> Result<()> {
        if sample.tau.len() != self.dim || sample.ddq.len() != self.dim {
            return Err(CoreError::DimensionMismatch(format!(
                "sample dimension {}/{} does not match delay line dimension {}",
                sample.tau.len(),
                sample.ddq.len(),
                self.dim
            )));
        }
        if let Some(last) = self.buffer.last() {
            if sample.t <= last.t {
                return Err(CoreError::NonMonotoneTime {
                    new: sample.t,
                    last: last.t,
                });
            }
        }
        let horizon = sample.t - 2.0 * self.delay;
        self.buffer.retain(|s| s.t >= horizon);
        self.buffer.push(sample);
        Ok(())
    }

    /// Returns the sample recorded closest to `t - L` (within half a delay),
    /// or `None` before the history covers that instant.
    pub fn lookup(&self, t: f64) -> Option<&DelaySample> {
        let target = t - self.delay;
        if target < -0.5 * self.delay {
            return None;
        }
        self.buffer
            .iter()
            .min_by(|a, b| {
                (a.t - target)
                    .abs()
                    .total_cmp(&(b.t - target).abs())
            })
            .filter(|s| (s.t - target).abs() <= 0.5 * self.delay)
    }

    /// Lumped-uncertainty estimate `N_hat = tau(t-L) - M_nom * ddq(t-L)`.
    ///
    /// Returns the zero vector while the history is still empty (t < L).
    pub fn estimate_lumped(&self, m_nom: &DMatrix<f64>, t: f64) -> Result<DVector<f64>> {
        if m_nom.nrows() != self.dim || m_nom.ncols() != self.dim {
            return Err(CoreError::DimensionMismatch(format!(
                "nominal inertia is {}x{}, delay line dimension is {}",
                m_nom.nrows(),
                m_nom.ncols(),
                self.dim
            )));
        }
        match self.lookup(t) {
            Some(sample) => Ok(&sample.tau - m_nom * &sample.ddq),
            None => Ok(DVector::zeros(self.dim)),
        }
    }
}

/// Backward difference quotient `(curr - prev) / dt`; `None` as the previous
/// value (first call) yields zero.
pub fn difference_acceleration(
    prev_dq: Option<&DVector<f64>>,
    curr_dq: &DVector<f64>,
    dt: f64,
) -> Result<DVector<f64>> {
    if dt <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    match prev_dq {
        None => Ok(DVector::zeros(curr_dq.len())),
        Some(prev) => {
            if prev.len() != curr_dq.len() {
                return Err(CoreError::DimensionMismatch(format!(
                    "velocity dimensions {} vs {}",
                    prev.len(),
                    curr_dq.len()
                )));
            }
            Ok((curr_dq - prev) / dt)
        }
    }
}
