use std::sync::Arc;

use rand::Rng;

use super::*;
use crate::rng::substream;

const SEEDS: u64 = 20;
const STEP: f64 = 1e-5;

fn close(auto: f64, fd: f64) -> bool {
    let diff = (auto - fd).abs();
    diff <= 1e-6 || diff <= 1e-3 * auto.abs().max(fd.abs())
}

fn random(rng: &mut impl Rng, shape: &[usize], keep_off: f64) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| loop {
            let v: f64 = rng.random_range(-2.0..2.0);
            if v.abs() > keep_off {
                break v;
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Checks every input coordinate of `f`, reduced to a scalar through a fixed
/// random weighting of its output.
fn check<F>(name: &str, inputs: &[Tensor], f: F)
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let weights: std::cell::OnceCell<Tensor> = std::cell::OnceCell::new();
    let eval = |ts: &[Tensor], want_grad: bool| -> (f64, Vec<Tensor>) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ts.iter().map(|t| tape.param(t.clone())).collect();
        let out = f(&mut tape, &vars);
        let w = weights.get_or_init(|| {
            let mut rng = substream(999, 0, tape.value(out).len() as u64);
            random(&mut rng, tape.value(out).shape(), 0.0)
        });
        let wv = tape.constant(w.clone());
        let prod = tape.mul(out, wv).unwrap();
        let loss = tape.sum(prod);
        let value = tape.value(loss).item();
        if !want_grad {
            return (value, Vec::new());
        }
        let g = tape.backward(loss).unwrap();
        (value, vars.iter().map(|&v| g.get_or_zeros(v)).collect())
    };
    let (_, grads) = eval(inputs, true);
    for (ti, t) in inputs.iter().enumerate() {
        for j in 0..t.len() {
            let mut plus = inputs.to_vec();
            plus[ti].data_mut()[j] += STEP;
            let mut minus = inputs.to_vec();
            minus[ti].data_mut()[j] -= STEP;
            let fd = (eval(&plus, false).0 - eval(&minus, false).0) / (2.0 * STEP);
            let auto = grads[ti].data()[j];
            assert!(close(auto, fd), "{name}: input {ti} coord {j}: autodiff {auto} vs fd {fd}");
        }
    }
}

fn each_seed(mut body: impl FnMut(&mut rand_chacha::ChaCha8Rng)) {
    for seed in 0..SEEDS {
        let mut rng = substream(seed, 77, 0);
        body(&mut rng);
    }
}

#[test]
fn matmul_family() {
    each_seed(|rng| {
        let a = random(rng, &[3, 4], 0.0);
        let b = random(rng, &[4, 5], 0.0);
        let bt = random(rng, &[5, 4], 0.0);
        check("matmul", &[a.clone(), b], |t, v| t.matmul(v[0], v[1]).unwrap());
        check("matmul_nt", &[a, bt], |t, v| t.matmul_nt(v[0], v[1]).unwrap());
    });
}

#[test]
fn additive_and_scaling() {
    each_seed(|rng| {
        let a = random(rng, &[3, 4], 0.0);
        let b = random(rng, &[3, 4], 0.0);
        let bias = random(rng, &[1, 4], 0.0);
        let s = random(rng, &[3, 1], 0.0);
        check("add", &[a.clone(), b.clone()], |t, v| t.add(v[0], v[1]).unwrap());
        check("mul", &[a.clone(), b], |t, v| t.mul(v[0], v[1]).unwrap());
        check("add_row_bias", &[a.clone(), bias], |t, v| t.add_row_bias(v[0], v[1]).unwrap());
        check("scale_rows", &[a.clone(), s], |t, v| t.scale_rows(v[0], v[1]).unwrap());
        check("scale", &[a.clone()], |t, v| t.scale(v[0], -1.7));
        check("add_scalar", &[a], |t, v| t.add_scalar(v[0], 0.3));
    });
}

#[test]
fn layout_ops() {
    each_seed(|rng| {
        let a = random(rng, &[3, 2], 0.0);
        let b = random(rng, &[3, 4], 0.0);
        check("concat_cols", &[a, b.clone()], |t, v| t.concat_cols(&[v[0], v[1]]).unwrap());
        check("slice_cols", &[b.clone()], |t, v| t.slice_cols(v[0], 1, 2).unwrap());
        check("slice_rows", &[b], |t, v| t.slice_rows(v[0], 1, 2).unwrap());
        let table = random(rng, &[5, 3], 0.0);
        check("embedding_lookup", &[table], |t, v| {
            t.embedding_lookup(v[0], &[4, 0, 4, 2]).unwrap()
        });
    });
}

#[test]
fn elementwise() {
    each_seed(|rng| {
        let a = random(rng, &[2, 5], 0.01);
        check("abs", &[a.clone()], |t, v| t.abs(v[0]));
        check("sigmoid", &[a.clone()], |t, v| t.sigmoid(v[0]));
        check("gelu", &[a.clone()], |t, v| t.gelu(v[0]));
        check("relu", &[a.clone()], |t, v| t.relu(v[0]));
        check("clamp", &[a.clone()], |t, v| t.clamp(v[0], -1.0, 1.0));
        let pos = Tensor::new(a.shape().to_vec(), a.data().iter().map(|x| x.abs() + 0.1).collect()).unwrap();
        check("log", &[pos], |t, v| t.log(v[0]));
    });
}

#[test]
fn reductions() {
    each_seed(|rng| {
        let a = random(rng, &[3, 3], 0.0);
        check("sum", &[a.clone()], |t, v| t.sum(v[0]));
        check("mean", &[a], |t, v| t.mean(v[0]));
    });
}

#[test]
fn softmax_and_layer_norm() {
    each_seed(|rng| {
        let a = random(rng, &[4, 5], 0.0);
        let mut mask = vec![0.0; 20];
        for (i, m) in mask.iter_mut().enumerate() {
            if i % 5 != i / 5 && rng.random_bool(0.4) {
                *m = MASK_NEG;
            }
        }
        let mask = Arc::new(mask);
        check("masked_softmax", &[a.clone()], |t, v| t.masked_softmax(v[0], Some(&mask)).unwrap());
        check("softmax", &[a.clone()], |t, v| t.masked_softmax(v[0], None).unwrap());
        let g = random(rng, &[1, 5], 0.0);
        let b = random(rng, &[1, 5], 0.0);
        check("layer_norm", &[a, g, b], |t, v| t.layer_norm(v[0], v[1], v[2]).unwrap());
    });
}

#[test]
fn softmax_examples() {
    let mut t = Tape::new();
    let x = t.constant(Tensor::row(vec![0.0, 0.0]));
    let y = t.masked_softmax(x, Some(&Arc::new(vec![0.0, 0.0]))).unwrap();
    assert_eq!(t.value(y).data(), &[0.5, 0.5]);
    let x = t.constant(Tensor::row(vec![3.0, -7.0]));
    let y = t.masked_softmax(x, Some(&Arc::new(vec![0.0, MASK_NEG]))).unwrap();
    assert_eq!(t.value(y).data(), &[1.0, 0.0]);
    let x = t.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let err = t.masked_softmax(x, Some(&Arc::new(vec![0.0, 0.0, MASK_NEG, MASK_NEG])));
    assert_eq!(err.unwrap_err(), crate::Error::AllMaskedRow(1));
}

#[test]
fn softmax_rows_sum_to_one() {
    each_seed(|rng| {
        let a = random(rng, &[6, 6], 0.0);
        let mut mask = vec![0.0; 36];
        for (i, m) in mask.iter_mut().enumerate() {
            if i % 6 != i / 6 && rng.random_bool(0.5) {
                *m = MASK_NEG;
            }
        }
        let mut t = Tape::new();
        let x = t.constant(a);
        let y = t.masked_softmax(x, Some(&Arc::new(mask.clone()))).unwrap();
        for (i, row) in t.value(y).data().chunks(6).enumerate() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for j in 0..6 {
                if mask[i * 6 + j] == MASK_NEG {
                    assert_eq!(row[j], 0.0);
                }
            }
        }
    });
}

#[test]
fn layer_norm_moments() {
    each_seed(|rng| {
        let a = random(rng, &[4, 32], 0.0);
        let mut t = Tape::new();
        let x = t.constant(a);
        let g = t.constant(Tensor::row(vec![1.0; 32]));
        let b = t.constant(Tensor::row(vec![0.0; 32]));
        let y = t.layer_norm(x, g, b).unwrap();
        for row in t.value(y).data().chunks(32) {
            let mu = row.iter().sum::<f64>() / 32.0;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / 32.0;
            assert!(mu.abs() < 1e-6 && (var - 1.0).abs() < 1e-6, "{mu} {var}");
        }
    });
}

#[test]
fn identity_matmul_and_square_sum() {
    let mut t = Tape::new();
    let a = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let i = t.constant(Tensor::identity(2));
    let av = t.param(a.clone());
    let p = t.matmul(i, av).unwrap();
    assert_eq!(t.value(p), &a);
    let sq = t.mul(av, av).unwrap();
    let s = t.sum(sq);
    let g = t.backward(s).unwrap();
    let expect: Vec<f64> = a.data().iter().map(|v| 2.0 * v).collect();
    assert_eq!(g.get(av).unwrap().data(), &expect[..]);
    assert!(g.get(i).is_none());
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut t = Tape::new();
    let x = t.param(Tensor::row(vec![1.0, 2.0]));
    assert_eq!(t.backward(x).unwrap_err(), crate::Error::NonScalarLoss(vec![1, 2]));
}

#[test]
fn shape_errors() {
    let mut t = Tape::new();
    let a = t.param(Tensor::zeros(vec![2, 3]));
    let b = t.param(Tensor::zeros(vec![2, 3]));
    assert!(t.matmul(a, b).is_err());
    assert!(t.add_row_bias(a, b).is_err());
    let c = t.param(Tensor::zeros(vec![3, 2]));
    assert!(t.add(a, c).is_err());
    assert!(t.slice_cols(a, 2, 2).is_err());
    assert!(t.embedding_lookup(a, &[2]).is_err());
}

#[test]
fn straight_through_step() {
    let mut t = Tape::new();
    let x = t.param(Tensor::row(vec![0.5, 1.0, 1.5, 4.0]));
    let s = t.step_ste(x, 1.0, 0.5, None).unwrap();
    assert_eq!(t.value(s).data(), &[0.0, 0.0, 1.0, 1.0]);
    let total = t.sum(s);
    let g = t.backward(total).unwrap().get(x).unwrap();
    for (gi, xi) in g.data().iter().zip([0.5, 1.0, 1.5, 4.0]) {
        let sg = sigmoid((xi - 1.0) / 0.5);
        assert!((gi - sg * (1.0 - sg) / 0.5).abs() < 1e-15);
    }
    assert!(t.step_ste(x, 1.0, 0.0, None).is_err());
}

#[test]
fn stop_gradient_blocks() {
    let mut t = Tape::new();
    let x = t.param(Tensor::row(vec![1.0, 2.0]));
    let y = t.stop_gradient(x);
    let z = t.mul(x, y).unwrap();
    let s = t.sum(z);
    let g = t.backward(s).unwrap();
    assert_eq!(g.get(x).unwrap().data(), &[1.0, 2.0]);
}
