use crate::{NumError, Scalar, Tape, Tensor, Var};

/// Evaluates `f` on a fresh tape with every input flagged `requires_grad`
/// and returns the scalar value plus one gradient per input.
pub fn forward_backward<T, F>(f: F, inputs: &[Tensor<T>]) -> Result<(T, Vec<Tensor<T>>), NumError>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var, NumError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = f(&mut tape, &vars)?;
    let value = tape.value(out).item();
    let mut grads = tape.backward(out)?;
    let gs = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| grads.take(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    Ok((value, gs))
}

fn eval_scalar<F>(f: &F, inputs: &[Tensor<f64>]) -> Result<f64, NumError>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var, NumError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let v = tape.value(out);
    if v.len() != 1 {
        return Err(NumError::Shape {
            op: "finite_diff_grad",
            record: out.index(),
            detail: format!("output must hold one element, got {:?}", v.shape()),
        });
    }
    let v = v.item();
    if !v.is_finite() {
        return Err(NumError::NonFinite(format!("objective evaluated to {v}")));
    }
    Ok(v)
}

/// Central-difference gradient estimate, `(f(x+h) - f(x-h)) / 2h` per scalar.
pub fn finite_diff_grad<F>(f: F, inputs: &[Tensor<f64>], h: f64) -> Result<Vec<Tensor<f64>>, NumError>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var, NumError>,
{
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for t in 0..inputs.len() {
        let mut g = Tensor::zeros(inputs[t].shape());
        for i in 0..inputs[t].len() {
            let x0 = inputs[t].data()[i];
            work[t].data_mut()[i] = x0 + h;
            let fp = eval_scalar(&f, &work)?;
            work[t].data_mut()[i] = x0 - h;
            let fm = eval_scalar(&f, &work)?;
            work[t].data_mut()[i] = x0;
            g.data_mut()[i] = (fp - fm) / (2.0 * h);
        }
        out.push(g);
    }
    Ok(out)
}

/// Norm-wise relative error `‖a − b‖ / max(‖a‖, ‖b‖)`; zero when both vanish.
pub fn relative_error<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(&x, &y)| (x.as_f64() - y.as_f64()).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|&x| x.as_f64().powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| x.as_f64().powi(2)).sum::<f64>().sqrt();
    let denom = na.max(nb);
    if denom == 0.0 {
        0.0
    } else {
        diff / denom
    }
}
