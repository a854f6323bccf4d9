use numcore::{finite_diff_grad, forward_backward, relative_error, NumError, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-6;
const TOL: f64 = 1e-5;

type Expr = Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var, NumError>>;

/// Contract `out` with a fixed random tensor so every output element matters.
fn project(t: &mut Tape<f64>, out: Var, seed: u64) -> Result<Var, NumError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Tensor::randn(t.value(out).shape(), 1.0, &mut rng);
    let w = t.constant(w);
    let p = t.mul(out, w)?;
    Ok(t.sum(p))
}

fn check(name: &str, f: Expr, inputs: Vec<Tensor<f64>>) {
    let (_, analytic) = forward_backward(&f, &inputs).unwrap();
    let numeric = finite_diff_grad(&f, &inputs, H).unwrap();
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let err = relative_error(a.data(), n.data());
        assert!(err <= TOL, "{name}: input {i} rel err {err:e}");
    }
}

fn cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Expr, Vec<Tensor<f64>>)> {
    let r = rng.random_range(1..5usize);
    let c = rng.random_range(1..5usize);
    let k = rng.random_range(1..5usize);
    let s: u64 = rng.random();
    let m = |rng: &mut ChaCha8Rng, r, c| Tensor::randn(&[r, c], 1.0, rng);
    vec![
        ("add", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.add(v[0], v[1])?; project(t, o, s) }) as Expr, vec![m(rng, r, c), m(rng, r, c)]),
        ("sub", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.sub(v[0], v[1])?; project(t, o, s) }), vec![m(rng, r, c), m(rng, r, c)]),
        ("mul", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.mul(v[0], v[1])?; project(t, o, s) }), vec![m(rng, r, c), m(rng, r, c)]),
        ("scale", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.scale(v[0], -1.7); project(t, o, s) }), vec![m(rng, r, c)]),
        ("add_bias", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.add_bias(v[0], v[1])?; project(t, o, s) }), vec![m(rng, r, c), Tensor::randn(&[c], 1.0, rng)]),
        ("matmul", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.matmul(v[0], v[1])?; project(t, o, s) }), vec![m(rng, r, k), m(rng, k, c)]),
        ("matmul_nt", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.matmul_nt(v[0], v[1])?; project(t, o, s) }), vec![m(rng, r, k), m(rng, c, k)]),
        ("exp", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.exp(v[0]); project(t, o, s) }), vec![m(rng, r, c)]),
        ("tanh", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.tanh(v[0]); project(t, o, s) }), vec![m(rng, r, c)]),
        ("silu", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.silu(v[0]); project(t, o, s) }), vec![m(rng, r, c)]),
        ("gelu", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.gelu(v[0]); project(t, o, s) }), vec![m(rng, r, c)]),
        ("square", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.square(v[0]); project(t, o, s) }), vec![m(rng, r, c)]),
        ("abs", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.abs(v[0]); project(t, o, s) }), vec![m(rng, r, c)]),
        ("softmax", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.softmax_rows(v[0], false)?; project(t, o, s) }), vec![m(rng, r, c)]),
        ("softmax_causal", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.softmax_rows(v[0], true)?; project(t, o, s) }), vec![m(rng, c, c)]),
        ("layer_norm", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.layer_norm(v[0], v[1], v[2])?; project(t, o, s) }),
            vec![m(rng, r, c + 2), Tensor::randn(&[c + 2], 1.0, rng), Tensor::randn(&[c + 2], 1.0, rng)]),
        ("sum", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let q = t.square(v[0]); Ok(t.sum(q)) }), vec![m(rng, r, c)]),
        ("mean", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let q = t.square(v[0]); Ok(t.mean(q)) }), vec![m(rng, r, c)]),
        ("gather_rows", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.gather_rows(v[0], &[0, r - 1, 0])?; project(t, o, s) }), vec![m(rng, r, c)]),
        ("scatter_add_rows", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.scatter_add_rows(v[0], &[1, 0, 1], 2)?; project(t, o, s) }), vec![m(rng, 3, c)]),
        ("concat_cols", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.concat_cols(&[v[0], v[1]])?; project(t, o, s) }), vec![m(rng, r, c), m(rng, r, k)]),
        ("concat_rows", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.concat_rows(&[v[0], v[1]])?; project(t, o, s) }), vec![m(rng, r, c), m(rng, k, c)]),
        ("slice_cols", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.slice_cols(v[0], 1, c)?; project(t, o, s) }), vec![m(rng, r, c + 2)]),
        ("reshape", Box::new(move |t: &mut Tape<f64>, v: &[Var]| { let o = t.reshape(v[0], &[c, r])?; let o = t.tanh(o); project(t, o, s) }), vec![m(rng, r, c)]),
    ]
}

#[test]
fn every_op_matches_finite_differences_on_100_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        for (name, f, inputs) in cases(&mut rng) {
            check(name, f, inputs);
        }
    }
}

fn mlp_loss(t: &mut Tape<f64>, v: &[Var]) -> Result<Var, NumError> {
    // v = [x, w1, b1, w2, b2, y]
    let h = t.linear(v[0], v[1], v[2])?;
    let h = t.tanh(h);
    let o = t.linear(h, v[3], v[4])?;
    let d = t.sub(o, v[5])?;
    let d = t.square(d);
    Ok(t.mean(d))
}

#[test]
fn two_layer_mlp_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let inputs = vec![
            Tensor::randn(&[5, 3], 1.0, &mut rng),
            Tensor::randn(&[3, 8], 0.5, &mut rng),
            Tensor::randn(&[8], 0.1, &mut rng),
            Tensor::randn(&[8, 2], 0.5, &mut rng),
            Tensor::randn(&[2], 0.1, &mut rng),
            Tensor::randn(&[5, 2], 1.0, &mut rng),
        ];
        let (_, a) = forward_backward(mlp_loss, &inputs).unwrap();
        let n = finite_diff_grad(mlp_loss, &inputs, H).unwrap();
        for (a, n) in a.iter().zip(&n) {
            assert!(relative_error(a.data(), n.data()) <= TOL);
        }
    }
}

#[test]
fn backward_is_bit_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inputs = vec![
        Tensor::randn(&[5, 3], 1.0, &mut rng),
        Tensor::randn(&[3, 8], 0.5, &mut rng),
        Tensor::randn(&[8], 0.1, &mut rng),
        Tensor::randn(&[8, 2], 0.5, &mut rng),
        Tensor::randn(&[2], 0.1, &mut rng),
        Tensor::randn(&[5, 2], 1.0, &mut rng),
    ];
    let (v1, g1) = forward_backward(mlp_loss, &inputs).unwrap();
    let (v2, g2) = forward_backward(mlp_loss, &inputs).unwrap();
    assert_eq!(v1.to_bits(), v2.to_bits());
    for (a, b) in g1.iter().zip(&g2) {
        let ab: Vec<u64> = a.data().iter().map(|x| x.to_bits()).collect();
        let bb: Vec<u64> = b.data().iter().map(|x| x.to_bits()).collect();
        assert_eq!(ab, bb);
    }
}

#[test]
fn f32_gradients_track_f64() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Tensor::<f64>::randn(&[4, 6], 1.0, &mut rng);
    let f64_grad = forward_backward(
        |t: &mut Tape<f64>, v: &[Var]| {
            let s = t.softmax_rows(v[0], false)?;
            let s = t.square(s);
            Ok(t.sum(s))
        },
        std::slice::from_ref(&x),
    )
    .unwrap()
    .1;
    let f32_grad = forward_backward(
        |t: &mut Tape<f32>, v: &[Var]| {
            let s = t.softmax_rows(v[0], false)?;
            let s = t.square(s);
            Ok(t.sum(s))
        },
        &[x.cast::<f32>()],
    )
    .unwrap()
    .1;
    assert!(relative_error(f32_grad[0].data(), f64_grad[0].cast::<f32>().data()) < 1e-5);
}

#[test]
fn shape_mismatch_reports_op() {
    let err = forward_backward(
        |t: &mut Tape<f64>, v: &[Var]| t.add(v[0], v[1]),
        &[Tensor::zeros(&[2]), Tensor::zeros(&[3])],
    )
    .unwrap_err();
    assert!(err.to_string().contains("`add`"));
}
