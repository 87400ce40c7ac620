use crate::error::{Error, Result};

/// Fixed-length boolean vector marking which vocabulary codes are present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiHotVector {
    bits: Vec<bool>,
}

impl MultiHotVector {
    pub fn new(len: usize) -> Self {
        MultiHotVector {
            bits: vec![false; len],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        MultiHotVector { bits }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v = Self::new(len);
        for i in indices {
            if i >= len {
                return Err(Error::Shape {
                    context: "MultiHotVector::from_indices",
                    expected: len,
                    got: i,
                });
            }
            v.bits[i] = true;
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect()
    }

    /// Element-wise OR with another vector of the same length.
    pub fn or_assign(&mut self, other: &MultiHotVector) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::Shape {
                context: "MultiHotVector::or_assign",
                expected: self.len(),
                got: other.len(),
            });
        }
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_indices_sets_exactly_those_bits() {
        let v = MultiHotVector::from_indices(4, [0, 2]).unwrap();
        assert_eq!(v.bits(), &[true, false, true, false]);
        assert_eq!(v.count_ones(), 2);
        assert_eq!(v.iter_ones().collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn out_of_range_index_is_error() {
        assert!(MultiHotVector::from_indices(3, [3]).is_err());
    }

    #[test]
    fn or_assign_is_elementwise_or() {
        let mut a = MultiHotVector::from_bits(vec![true, false, true]);
        let b = MultiHotVector::from_bits(vec![false, false, true]);
        a.or_assign(&b).unwrap();
        assert_eq!(a.bits(), &[true, false, true]);
    }

    #[test]
    fn to_f64_is_zero_one() {
        let v = MultiHotVector::from_bits(vec![true, false]);
        assert_eq!(v.to_f64(), vec![1.0, 0.0]);
    }
}
