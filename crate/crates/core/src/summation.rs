/// How the pricing sums are accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Accumulation {
    /// Plain left-to-right IEEE double summation.
    #[default]
    Plain,
    /// Neumaier-compensated summation (roughly doubles the working precision
    /// of the accumulator; the summands themselves are unchanged).
    Compensated,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Accumulator {
    mode: Accumulation,
    sum: f64,
    carry: f64,
}

impl Accumulator {
    pub(crate) fn new(mode: Accumulation) -> Self {
        Self {
            mode,
            sum: 0.0,
            carry: 0.0,
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        match self.mode {
            Accumulation::Plain => self.sum += x,
            Accumulation::Compensated => {
                let t = self.sum + x;
                if self.sum.abs() >= x.abs() {
                    self.carry += (self.sum - t) + x;
                } else {
                    self.carry += (x - t) + self.sum;
                }
                self.sum = t;
            }
        }
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

pub(crate) fn sum_with(mode: Accumulation, terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Accumulator::new(mode);
    for x in terms {
        acc.add(x);
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_recovers_cancelled_bits() {
        let terms = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(sum_with(Accumulation::Plain, terms), 0.0);
        assert_eq!(sum_with(Accumulation::Compensated, terms), 2.0);
    }
}
