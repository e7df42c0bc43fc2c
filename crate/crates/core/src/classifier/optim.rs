/// SGD with heavy-ball momentum: `v = m v + g; p -= lr v`.
#[derive(Debug, Clone)]
pub struct MomentumSgd {
    momentum: f64,
    velocity: Vec<f64>,
}

impl MomentumSgd {
    pub fn new(n_params: usize, momentum: f64) -> Self {
        Self {
            momentum,
            velocity: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), self.velocity.len());
        debug_assert_eq!(grad.len(), self.velocity.len());
        for ((p, v), &g) in params.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = self.momentum * *v + g;
            *p -= lr * *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulates_velocity() {
        let mut opt = MomentumSgd::new(1, 0.9);
        let mut p = [1.0];
        opt.step(&mut p, &[1.0], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-15);
        opt.step(&mut p, &[1.0], 0.1);
        // v = 0.9 + 1 = 1.9
        assert!((p[0] - 0.71).abs() < 1e-15);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut opt = MomentumSgd::new(2, 0.9);
        let mut p = [3.0, -2.0];
        for _ in 0..500 {
            let g = [2.0 * p[0], 2.0 * p[1]];
            opt.step(&mut p, &g, 0.05);
        }
        assert!(p[0].abs() < 1e-6 && p[1].abs() < 1e-6);
    }
}
