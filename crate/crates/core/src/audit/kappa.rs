use std::collections::HashMap;
use std::hash::Hash;

use super::AuditError;

/// Cohen's kappa `(p_o - p_e) / (1 - p_e)`. When chance agreement is
/// already 1 the result is 1 for perfect agreement and 0 otherwise.
pub fn cohen_kappa<L: Eq + Hash>(a: &[L], b: &[L]) -> Result<f64, AuditError> {
    if a.len() != b.len() {
        return Err(AuditError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(AuditError::Empty);
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let mut ca: HashMap<&L, usize> = HashMap::new();
    let mut cb: HashMap<&L, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    let p_o = agree / n;
    let p_e: f64 = ca.iter().map(|(l, &c)| c as f64 * cb.get(l).copied().unwrap_or(0) as f64).sum::<f64>() / (n * n);
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(if p_o == 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Confusion-matrix formulation over label indices.
    fn oracle(a: &[usize], b: &[usize], k: usize) -> f64 {
        let mut m = vec![vec![0.0; k]; k];
        for (&x, &y) in a.iter().zip(b) {
            m[x][y] += 1.0;
        }
        let n = a.len() as f64;
        let po = (0..k).map(|i| m[i][i]).sum::<f64>() / n;
        let pe = (0..k).map(|i| m[i].iter().sum::<f64>() * (0..k).map(|r| m[r][i]).sum::<f64>()).sum::<f64>() / (n * n);
        if pe == 1.0 {
            return if po == 1.0 { 1.0 } else { 0.0 };
        }
        (po - pe) / (1.0 - pe)
    }

    #[test]
    fn hand_cases() {
        assert_eq!(cohen_kappa(&[1, 0, 2, 1], &[1, 0, 2, 1]).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap(), 0.0);
        assert_eq!(cohen_kappa(&["y", "y"], &["y", "y"]).unwrap(), 1.0);
        assert!(matches!(cohen_kappa(&[1], &[1, 2]), Err(AuditError::LengthMismatch(1, 2))));
        assert!(matches!(cohen_kappa::<u8>(&[], &[]), Err(AuditError::Empty)));
    }

    #[test]
    fn matches_oracle_symmetric_and_relabel_invariant() {
        let mut rng = crate::seed::rng(6);
        for _ in 0..500 {
            let k = rng.random_range(2..5);
            let n = rng.random_range(1..40);
            let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let got = cohen_kappa(&a, &b).unwrap();
            assert!((got - oracle(&a, &b, k)).abs() < 1e-12);
            assert!((got - cohen_kappa(&b, &a).unwrap()).abs() < 1e-12);
            let relabel = |v: &[usize]| v.iter().map(|x| format!("L{}", (x + 1) % k)).collect::<Vec<_>>();
            assert!((got - cohen_kappa(&relabel(&a), &relabel(&b)).unwrap()).abs() < 1e-12);
            assert!((-1.0..=1.0).contains(&got));
        }
    }
}
