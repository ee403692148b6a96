/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(learning_rate: f64, parameter_count: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first: vec![0.0; parameter_count],
            second: vec![0.0; parameter_count],
            step: 0,
        }
    }

    /// One update. `params` and `grads` are matching lists of flat blocks whose
    /// total length equals the parameter count given at construction.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient block mismatch");
        self.step += 1;
        let correction1 = 1.0 - self.beta1.powi(self.step);
        let correction2 = 1.0 - self.beta2.powi(self.step);
        let mut offset = 0;
        for (block, grad) in params.into_iter().zip(grads) {
            assert_eq!(block.len(), grad.len(), "block length mismatch");
            for (i, (p, &g)) in block.iter_mut().zip(grad).enumerate() {
                let m = &mut self.first[offset + i];
                let v = &mut self.second[offset + i];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
            offset += block.len();
        }
        assert_eq!(offset, self.first.len(), "parameter count changed");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let mut x = [3.0, -2.0];
        let mut adam = Adam::new(0.1, 2);
        for _ in 0..500 {
            let g = [2.0 * x[0], 2.0 * x[1]];
            adam.step(vec![&mut x], vec![&g]);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2), "{x:?}");
    }

    #[test]
    fn zero_rate_leaves_parameters() {
        let mut x = [1.5, 0.25];
        let mut adam = Adam::new(0.0, 2);
        for _ in 0..10 {
            adam.step(vec![&mut x], vec![&[1.0, -3.0]]);
        }
        assert_eq!(x, [1.5, 0.25]);
    }
}
