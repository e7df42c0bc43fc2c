use super::{clamp_prob, BmmParams};
use crate::data::{BitMatrix, RealMatrix};
use crate::error::{Error, Result};

/// Log-domain lookup tables: `log p(z | k) + log pi_k = base[k] + sum_{j: z_j = 1} logit[k][j]`.
pub(crate) struct LogTables {
    base: Vec<f64>,
    logit: RealMatrix,
}

impl LogTables {
    pub(crate) fn new(params: &BmmParams) -> Self {
        let (k, d) = (params.k(), params.d());
        let mut base = Vec::with_capacity(k);
        let mut logit = RealMatrix::zeros(k, d);
        for c in 0..k {
            let mut b = params.pi()[c].ln();
            for (j, &m) in params.prototype(c).iter().enumerate() {
                let m = clamp_prob(m);
                let log_off = (1.0 - m).ln();
                b += log_off;
                logit.set(c, j, m.ln() - log_off);
            }
            base.push(b);
        }
        Self { base, logit }
    }

    /// Joint log-probabilities `log(pi_k p(z_i | mu_k))` for every component.
    #[inline]
    pub(crate) fn joint(&self, z: &BitMatrix, i: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.base);
        for j in z.ones_in_row(i) {
            for (c, o) in out.iter_mut().enumerate() {
                *o += self.logit.get(c, j);
            }
        }
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_dims(z: &BitMatrix, params: &BmmParams) -> Result<()> {
    if z.n_cols() != params.d() {
        return Err(Error::shape(format!(
            "embeddings have D={} but the model has D={}",
            z.n_cols(),
            params.d()
        )));
    }
    Ok(())
}

/// Responsibilities `gamma[i][k]` (rows sum to one).
pub fn e_step(z: &BitMatrix, params: &BmmParams) -> Result<RealMatrix> {
    e_step_with_ll(z, params).map(|(g, _)| g)
}

/// Responsibilities together with the marginal log-likelihood they normalize.
pub fn e_step_with_ll(z: &BitMatrix, params: &BmmParams) -> Result<(RealMatrix, f64)> {
    check_dims(z, params)?;
    let tables = LogTables::new(params);
    let k = params.k();
    let mut gamma = RealMatrix::zeros(z.n_rows(), k);
    let mut ll = 0.0;
    let mut joint = vec![0.0; k];
    for i in 0..z.n_rows() {
        tables.joint(z, i, &mut joint);
        let lse = log_sum_exp(&joint);
        ll += lse;
        let row = gamma.row_mut(i);
        for (g, &lj) in row.iter_mut().zip(&joint) {
            *g = (lj - lse).exp();
        }
        // exp of a normalized log vector sums to 1 only up to rounding.
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|g| *g /= s);
    }
    Ok((gamma, ll))
}

/// Marginal log-likelihood `sum_i log sum_k pi_k p(z_i | mu_k)`.
pub fn log_likelihood(z: &BitMatrix, params: &BmmParams) -> Result<f64> {
    check_dims(z, params)?;
    let tables = LogTables::new(params);
    let mut joint = vec![0.0; params.k()];
    let mut ll = 0.0;
    for i in 0..z.n_rows() {
        tables.joint(z, i, &mut joint);
        ll += log_sum_exp(&joint);
    }
    Ok(ll)
}

/// Expected complete-data log-likelihood
/// `sum_i sum_k gamma_ik log(pi_k p(z_i | mu_k))`, reported alongside the
/// marginal during fitting.
pub fn eq3_value(z: &BitMatrix, params: &BmmParams, gamma: &RealMatrix) -> Result<f64> {
    check_dims(z, params)?;
    if gamma.n_rows() != z.n_rows() || gamma.n_cols() != params.k() {
        return Err(Error::shape(format!(
            "responsibilities are {}x{}, expected {}x{}",
            gamma.n_rows(),
            gamma.n_cols(),
            z.n_rows(),
            params.k()
        )));
    }
    let tables = LogTables::new(params);
    let mut joint = vec![0.0; params.k()];
    let mut total = 0.0;
    for i in 0..z.n_rows() {
        tables.joint(z, i, &mut joint);
        for (&g, &lj) in gamma.row(i).iter().zip(&joint) {
            if g > 0.0 {
                total += g * lj;
            }
        }
    }
    Ok(total)
}

/// How the M-step treats the mixing coefficients.
#[derive(Debug, Clone, Copy)]
pub enum PiUpdate<'a> {
    Trainable,
    Fixed(&'a [f64]),
}

/// Re-estimates prototypes (and optionally mixing weights) from
/// responsibilities. Prototypes are clamped to `[EPS_P, 1 - EPS_P]`.
pub fn m_step(z: &BitMatrix, gamma: &RealMatrix, pi: PiUpdate<'_>) -> Result<BmmParams> {
    let (n, k, d) = (z.n_rows(), gamma.n_cols(), z.n_cols());
    if gamma.n_rows() != n {
        return Err(Error::shape(format!(
            "{} responsibility rows for {n} samples",
            gamma.n_rows()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("a mixture needs K >= 1".into()));
    }
    let mut mass = vec![0.0; k];
    let mut weighted = RealMatrix::zeros(k, d);
    for i in 0..n {
        let g = gamma.row(i);
        for (m, &gk) in mass.iter_mut().zip(g) {
            *m += gk;
        }
        for j in z.ones_in_row(i) {
            for (c, &gk) in g.iter().enumerate() {
                let cell = weighted.get(c, j) + gk;
                weighted.set(c, j, cell);
            }
        }
    }
    if let Some(component) = mass.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::DegenerateComponent { component });
    }
    for (c, &m) in mass.iter().enumerate() {
        for v in weighted.row_mut(c) {
            *v = clamp_prob(*v / m);
        }
    }
    let pi = match pi {
        PiUpdate::Trainable => {
            let total: f64 = mass.iter().sum();
            mass.iter().map(|m| m / total).collect()
        }
        PiUpdate::Fixed(p) => {
            if p.len() != k {
                return Err(Error::shape(format!(
                    "{} fixed mixing coefficients for K={k}",
                    p.len()
                )));
            }
            p.to_vec()
        }
    };
    Ok(BmmParams::new_unchecked(weighted, pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmm::EPS_P;
    use crate::data::column_means;
    use crate::rng::SeededRng;
    use proptest::prelude::*;
    use rand::Rng;

    fn two_comp() -> BmmParams {
        BmmParams::from_rows(&[[0.9, 0.1], [0.1, 0.9]], vec![0.5, 0.5]).unwrap()
    }

    fn random_instance(seed: u64) -> (BitMatrix, BmmParams) {
        let mut rng = SeededRng::new(seed);
        let (n, d, k) = (
            rng.random_range(1..40),
            rng.random_range(1..100),
            rng.random_range(1..6),
        );
        let bits: Vec<bool> = (0..n * d).map(|_| rng.random()).collect();
        let z = BitMatrix::from_bools(n, d, &bits).unwrap();
        let mu: Vec<f64> = (0..k * d).map(|_| rng.random::<f64>()).collect();
        let mut pi: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.01).collect();
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= s);
        // renormalize exactly enough for the constructor tolerance
        let params = BmmParams::new(RealMatrix::from_vec(k, d, mu).unwrap(), pi).unwrap();
        (z, params)
    }

    #[test]
    fn e_step_hand_example() {
        // pi mu^z (1-mu)^(1-z): 0.5*0.9*0.9 = 0.405 vs 0.5*0.1*0.1 = 0.005.
        let z = BitMatrix::pack_rows(&[[1u8, 0]]).unwrap();
        let g = e_step(&z, &two_comp()).unwrap();
        assert!((g.get(0, 0) - 81.0 / 82.0).abs() < 1e-12);
        assert!((g.get(0, 1) - 1.0 / 82.0).abs() < 1e-12);
    }

    #[test]
    fn e_step_single_component() {
        let z = BitMatrix::pack_rows(&[[1u8, 0, 1], [0, 0, 0]]).unwrap();
        let p = BmmParams::from_rows(&[[0.2, 0.7, 0.4]], vec![1.0]).unwrap();
        let g = e_step(&z, &p).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn e_step_identical_components() {
        let z = BitMatrix::pack_rows(&[[1u8, 0, 1], [0, 1, 1]]).unwrap();
        let p = BmmParams::from_rows(&[[0.2, 0.7, 0.4], [0.2, 0.7, 0.4]], vec![0.5, 0.5]).unwrap();
        let g = e_step(&z, &p).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn dimension_mismatch() {
        let z = BitMatrix::zeros(2, 3);
        assert!(matches!(e_step(&z, &two_comp()), Err(Error::Shape(_))));
        assert!(matches!(
            log_likelihood(&z, &two_comp()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn log_likelihood_examples() {
        let z = BitMatrix::pack_rows(&[[1u8]]).unwrap();
        let p = BmmParams::from_rows(&[[0.5]], vec![1.0]).unwrap();
        assert!((log_likelihood(&z, &p).unwrap() - 0.5f64.ln()).abs() < 1e-15);

        let z = BitMatrix::pack_rows(&[[1u8, 0]]).unwrap();
        assert!((log_likelihood(&z, &two_comp()).unwrap() - 0.41f64.ln()).abs() < 1e-12);

        let z = BitMatrix::pack_rows(&[[1u8, 0, 1], [0, 1, 1], [0, 0, 0]]).unwrap();
        let one = BmmParams::from_rows(&[[0.2, 0.7, 0.4]], vec![1.0]).unwrap();
        let two =
            BmmParams::from_rows(&[[0.2, 0.7, 0.4], [0.2, 0.7, 0.4]], vec![0.5, 0.5]).unwrap();
        let a = log_likelihood(&z, &one).unwrap();
        let b = log_likelihood(&z, &two).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn eq3_matches_direct_sum() {
        let z = BitMatrix::pack_rows(&[[1u8, 0], [0, 1], [1, 1]]).unwrap();
        let p = two_comp();
        let g = e_step(&z, &p).unwrap();
        let mut expected = 0.0;
        for i in 0..3 {
            for k in 0..2 {
                let mut prob = p.pi()[k];
                for j in 0..2 {
                    let m = p.mu().get(k, j);
                    prob *= if z.get(i, j) { m } else { 1.0 - m };
                }
                expected += g.get(i, k) * prob.ln();
            }
        }
        assert!((eq3_value(&z, &p, &g).unwrap() - expected).abs() < 1e-12);
        // Expected complete-data value never exceeds the marginal.
        assert!(eq3_value(&z, &p, &g).unwrap() <= log_likelihood(&z, &p).unwrap());
    }

    #[test]
    fn m_step_single_component_is_column_means() {
        let z = BitMatrix::pack_rows(&[[1u8, 0], [1, 1]]).unwrap();
        let g = RealMatrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let p = m_step(&z, &g, PiUpdate::Trainable).unwrap();
        assert_eq!(p.prototype(0), &[1.0 - EPS_P, 0.5]);
        assert_eq!(p.pi(), &[1.0]);
    }

    #[test]
    fn m_step_hard_assignment() {
        let z = BitMatrix::pack_rows(&[[1u8, 1], [0, 0]]).unwrap();
        let g = RealMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let p = m_step(&z, &g, PiUpdate::Trainable).unwrap();
        assert_eq!(p.pi(), &[0.5, 0.5]);
        assert_eq!(p.prototype(0), &[1.0 - EPS_P, 1.0 - EPS_P]);
        assert_eq!(p.prototype(1), &[EPS_P, EPS_P]);

        let fixed = [0.3, 0.7];
        let p = m_step(&z, &g, PiUpdate::Fixed(&fixed)).unwrap();
        assert_eq!(p.pi(), &fixed);
    }

    #[test]
    fn m_step_degenerate_component() {
        let z = BitMatrix::pack_rows(&[[1u8, 1], [0, 0]]).unwrap();
        let g = RealMatrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]).unwrap();
        let err = m_step(&z, &g, PiUpdate::Trainable).unwrap_err();
        assert!(matches!(err, Error::DegenerateComponent { component: 1 }));
    }

    proptest! {
        #[test]
        fn responsibilities_are_normalized(seed in any::<u64>()) {
            let (z, p) = random_instance(seed);
            let g = e_step(&z, &p).unwrap();
            for i in 0..g.n_rows() {
                let s: f64 = g.row(i).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert!(g.row(i).iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }

        #[test]
        fn uniform_responsibilities_give_column_means(seed in any::<u64>(), k in 1usize..6) {
            let (z, _) = random_instance(seed);
            let g = RealMatrix::from_vec(z.n_rows(), k, vec![1.0 / k as f64; z.n_rows() * k]).unwrap();
            let p = m_step(&z, &g, PiUpdate::Trainable).unwrap();
            let means: Vec<f64> = column_means(&z).unwrap().into_iter().map(clamp_prob).collect();
            for c in 0..k {
                for (a, b) in p.prototype(c).iter().zip(&means) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
