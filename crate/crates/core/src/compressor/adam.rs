use crate::scalar::Scalar;

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for AdamParams<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::lit(0.01),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
        }
    }
}

/// First and second moment accumulators for the strike vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `strikes` against `grad`, followed by
    /// clamping each strike at zero.
    pub fn step(&mut self, strikes: &mut [T], grad: &[T], p: &AdamParams<T>) {
        assert_eq!(strikes.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let one = T::one();
        let bc1 = one - p.beta1.powi(t);
        let bc2 = one - p.beta2.powi(t);
        for i in 0..strikes.len() {
            let g = grad[i];
            self.m[i] = p.beta1 * self.m[i] + (one - p.beta1) * g;
            self.v[i] = p.beta2 * self.v[i] + (one - p.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            let k = strikes[i] - p.learning_rate * m_hat / (v_hat.sqrt() + p.epsilon);
            strikes[i] = k.max(T::zero());
        }
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step<T: Scalar>(
    state: &AdamState<T>,
    grad: &[T],
    params: &AdamParams<T>,
    strikes: &[T],
) -> (Vec<T>, AdamState<T>) {
    let mut next = state.clone();
    let mut k = strikes.to_vec();
    next.step(&mut k, grad, params);
    (k, next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let st = AdamState::new(3);
        let k = [0.5, 1.0, 1.5];
        let (k2, st2) = adam_step(&st, &[0.0; 3], &AdamParams::default(), &k);
        assert_eq!(k2, k);
        assert_eq!(st2.step_count(), 1);
    }

    #[test]
    fn clamps_at_zero() {
        let st = AdamState::new(1);
        let p = AdamParams {
            learning_rate: 0.003,
            ..AdamParams::default()
        };
        let (k, _) = adam_step(&st, &[5.0], &p, &[0.001]);
        assert_eq!(k, vec![0.0]);
    }
}
