use numcore::{ParamStore, Scalar, Tensor};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ParamStore<T>) -> Self {
        let zeros: Vec<Tensor<T>> = params.tensors().map(|t| Tensor::zeros(t.shape())).collect();
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &[Tensor<T>], lr: f64) {
        assert_eq!(grads.len(), self.m.len(), "one gradient per parameter");
        self.t += 1;
        let (b1, b2) = (T::c(self.beta1), T::c(self.beta2));
        let c1 = T::c(1.0 - self.beta1.powi(self.t as i32));
        let c2 = T::c(1.0 - self.beta2.powi(self.t as i32));
        let (lr, eps) = (T::c(lr), T::c(self.eps));
        for (((p, g), m), v) in params.tensors_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *p = *p - lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Exponential moving average of parameters.
#[derive(Debug, Clone)]
pub struct Ema<T> {
    pub decay: f64,
    pub shadow: ParamStore<T>,
}

impl<T: Scalar> Ema<T> {
    pub fn new(params: &ParamStore<T>, decay: f64) -> Self {
        Ema { decay, shadow: params.clone() }
    }

    /// `shadow ← decay · shadow + (1 − decay) · params`
    pub fn update(&mut self, params: &ParamStore<T>) {
        let d = T::c(self.decay);
        let e = T::c(1.0 - self.decay);
        for (s, p) in self.shadow.tensors_mut().zip(params.tensors()) {
            for (s, &p) in s.data_mut().iter_mut().zip(p.data()) {
                *s = d * *s + e * p;
            }
        }
    }
}

/// Multiplies the learning rate by `factor` after `patience` epochs without
/// a new best metric, never going below `floor`.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub floor: f64,
    best: f64,
    since_best: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, patience: usize, floor: f64) -> Self {
        PlateauScheduler { lr, factor: 0.1, patience, floor, best: f64::INFINITY, since_best: 0 }
    }

    /// Records one epoch's metric and returns the learning rate to use next.
    pub fn observe(&mut self, metric: f64) -> f64 {
        if metric < self.best {
            self.best = metric;
            self.since_best = 0;
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience {
                // guard against 1e-3 · 0.1 · 0.1 landing a hair under the floor
                let next = self.lr * self.factor;
                self.lr = if next < self.floor * (1.0 + 1e-9) { self.floor } else { next };
                self.since_best = 0;
            }
        }
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}
