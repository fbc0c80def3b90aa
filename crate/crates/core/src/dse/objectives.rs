use serde::{Deserialize, Serialize};

use super::DseError;

/// Design objectives of one mapping.
///
/// Energy, routed-message count and allocated PEs per type are minimized;
/// average and minimal hop distance are maximized because longer analysed
/// routes leave the run-time manager more placement freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    /// nJ per activation.
    pub energy: f64,
    pub msg_count: u32,
    pub avg_hop: f64,
    pub min_hop: u32,
    pub alloc_per_type: Vec<u32>,
}

impl ObjectiveVector {
    pub fn dim(&self) -> usize {
        4 + self.alloc_per_type.len()
    }

    /// Raw values in storage order: energy, msg_count, avg_hop, min_hop,
    /// then one allocation count per resource type.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.energy, f64::from(self.msg_count), self.avg_hop, f64::from(self.min_hop)];
        v.extend(self.alloc_per_type.iter().map(|&a| f64::from(a)));
        v
    }

    pub fn from_values(values: &[f64]) -> Result<Self, DseError> {
        if values.len() < 4 {
            return Err(DseError::DimensionMismatch { left: values.len(), right: 4 });
        }
        let count = |v: f64| v.max(0.0).round() as u32;
        Ok(Self {
            energy: values[0],
            msg_count: count(values[1]),
            avg_hop: values[2],
            min_hop: count(values[3]),
            alloc_per_type: values[4..].iter().map(|&v| count(v)).collect(),
        })
    }

    /// Every component oriented for minimization.
    pub fn minimization_key(&self) -> Vec<f64> {
        let mut v = self.values();
        v[2] = -v[2];
        v[3] = -v[3];
        v
    }
}

/// Pareto dominance with hop objectives maximized.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool, DseError> {
    if a.dim() != b.dim() {
        return Err(DseError::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(dominates_keys(&a.minimization_key(), &b.minimization_key()))
}

pub(crate) fn dominates_keys(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(energy: f64, min_hop: u32) -> ObjectiveVector {
        ObjectiveVector { energy, msg_count: 1, avg_hop: 2.0, min_hop, alloc_per_type: vec![1, 0, 0] }
    }

    #[test]
    fn dominance_examples() {
        let a = ov(10.0, 2);
        assert!(!dominates(&a, &a).unwrap());
        assert!(dominates(&ov(9.0, 2), &a).unwrap());
        assert!(!dominates(&a, &ov(9.0, 2)).unwrap());
        // better energy vs better (larger) min hop
        let b = ov(12.0, 3);
        assert!(!dominates(&a, &b).unwrap());
        assert!(!dominates(&b, &a).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        let mut b = ov(1.0, 2);
        b.alloc_per_type.pop();
        assert!(matches!(dominates(&ov(1.0, 2), &b), Err(DseError::DimensionMismatch { .. })));
    }

    #[test]
    fn seven_objectives_for_three_types() {
        assert_eq!(ov(1.0, 2).dim(), 7);
        let v = ov(3.5, 4);
        assert_eq!(ObjectiveVector::from_values(&v.values()).unwrap(), v);
    }
}
