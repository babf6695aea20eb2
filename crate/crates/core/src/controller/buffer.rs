use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BufferError {
    #[error("no sample one period before step {step} (period is {period_steps} steps)")]
    BufferUnderflow { step: usize, period_steps: usize },
    #[error("sample for step {step} is not held: {written} samples written, period {period_steps}")]
    Misaligned { step: usize, written: usize, period_steps: usize },
}

/// Ring buffer holding exactly one period of samples, so that the value
/// written at step `k` can be read back at step `k + N`.
#[derive(Debug, Clone)]
pub struct PeriodBuffer<T> {
    slots: Vec<T>,
    period_steps: usize,
    written: usize,
}

impl<T> PeriodBuffer<T> {
    pub fn new(period_steps: usize) -> Self {
        assert!(period_steps > 0, "period must hold at least one sample");
        Self { slots: Vec::with_capacity(period_steps), period_steps, written: 0 }
    }

    pub fn period_steps(&self) -> usize {
        self.period_steps
    }

    /// Number of samples written so far, i.e. the step index of the next write.
    pub fn written(&self) -> usize {
        self.written
    }

    pub fn push(&mut self, value: T) {
        if self.slots.len() < self.period_steps {
            self.slots.push(value);
        } else {
            self.slots[self.written % self.period_steps] = value;
        }
        self.written += 1;
    }

    /// The sample written at step `step − N`.
    pub fn delayed(&self, step: usize) -> Result<&T, BufferError> {
        let source = step.checked_sub(self.period_steps).ok_or(BufferError::BufferUnderflow {
            step,
            period_steps: self.period_steps,
        })?;
        if source >= self.written || source + self.period_steps < self.written {
            return Err(BufferError::Misaligned { step, written: self.written, period_steps: self.period_steps });
        }
        Ok(&self.slots[source % self.period_steps])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_sample_comes_back_after_one_period() {
        let mut b = PeriodBuffer::new(4);
        for k in 0..4 {
            b.push(k);
        }
        assert_eq!(b.delayed(4), Ok(&0));
    }

    #[test]
    fn reading_inside_first_period_underflows() {
        let mut b = PeriodBuffer::new(3);
        b.push(1.0);
        assert_eq!(b.delayed(2), Err(BufferError::BufferUnderflow { step: 2, period_steps: 3 }));
    }

    #[test]
    fn constant_buffer_replays_current_value() {
        let mut b = PeriodBuffer::new(5);
        for _ in 0..12 {
            b.push(7.5);
        }
        assert_eq!(b.delayed(12), Ok(&7.5));
    }

    #[test]
    fn overwritten_and_unwritten_samples_are_rejected() {
        let mut b = PeriodBuffer::new(2);
        for k in 0..6 {
            b.push(k);
        }
        assert!(matches!(b.delayed(5), Err(BufferError::Misaligned { .. })));
        assert!(matches!(b.delayed(8), Err(BufferError::Misaligned { .. })));
        assert_eq!(b.delayed(7), Ok(&5));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(values in proptest::collection::vec(any::<f64>(), 1..200), n in 1usize..20) {
            let mut b = PeriodBuffer::new(n);
            for (k, v) in values.iter().enumerate() {
                if k >= n {
                    let back: f64 = *b.delayed(k).unwrap();
                    prop_assert_eq!(back.to_bits(), values[k - n].to_bits());
                }
                b.push(*v);
            }
        }
    }
}
