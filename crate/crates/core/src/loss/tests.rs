use rand::Rng;

use super::*;
use crate::channel::{hard_decision, sigma_from_ebn0};
use crate::code::Code;
use crate::ecct::{EcctConfig, EcctModel};
use crate::hdd::{BchDecoder, HardDecoder};
use crate::rng::substream;

fn random_case(rng: &mut impl Rng, n: usize) -> (Word, Vec<f64>) {
    let t = Word::from_bools((0..n).map(|_| rng.random_bool(0.3)));
    let s = (0..n).map(|_| rng.random_range(-6.0..6.0)).collect();
    (t, s)
}

#[test]
fn bce_examples() {
    let zero = Word::zeros(5);
    assert!(bce_loss(&zero, &[60.0; 5]).unwrap() < 1e-11);
    let l = bce_loss(&zero, &[0.0; 5]).unwrap();
    assert!((l - 5.0 * std::f64::consts::LN_2).abs() < 1e-12);
    assert!(bce_loss(&zero, &[0.0; 4]).is_err());
    // clamped, not infinite
    let ones = Word::from_bits(&[1, 1]);
    assert!((bce_loss(&ones, &[800.0, 800.0]).unwrap() + 2.0 * PROB_FLOOR.ln()).abs() < 1e-3);
}

#[test]
fn bce_matches_naive_formula() {
    let mut rng = substream(1, 0, 0);
    for _ in 0..200 {
        let (t, s) = random_case(&mut rng, 15);
        let naive: f64 = -(0..15)
            .map(|i| {
                let p = 1.0 / (1.0 + (-s[i]).exp());
                let ti = t.get(i) as u8 as f64;
                ti * (1.0 - p).ln() + (1.0 - ti) * p.ln()
            })
            .sum::<f64>();
        assert!((bce_loss(&t, &s).unwrap() - naive).abs() < 1e-12);
        let mut tape = Tape::new();
        let sv = tape.param(Tensor::column(s.clone()));
        let terms = sample_loss_on_tape(&mut tape, sv, &t, None).unwrap();
        assert!((tape.value(terms.loss).item() - naive).abs() < 1e-12);
    }
}

#[test]
fn soft_hamming_examples() {
    let t = vec![1.0, -1.0, 1.0, -1.0];
    assert!(soft_hamming(&t, &[30.0, -30.0, 30.0, -30.0]).unwrap() < 1e-12);
    assert_eq!(soft_hamming(&t, &[0.0; 4]).unwrap(), 2.0);
    let v = soft_hamming(&t, &[30.0, 30.0, -30.0, -30.0]).unwrap();
    assert!((v - 2.0).abs() < 1e-12);
    let mut rng = substream(2, 0, 0);
    for _ in 0..100 {
        let (w, s) = random_case(&mut rng, 31);
        let ts = bipolar(&w);
        let big: Vec<f64> = s.iter().map(|v| 50.0 * v.signum()).collect();
        let hard = hard_hamming(&ts, &big).unwrap() as f64;
        assert!((soft_hamming(&ts, &big).unwrap() - hard).abs() < 1e-10);
    }
}

#[test]
fn step_gate_boundary_and_proxy() {
    assert_eq!(step_gate(2.0, 2, 1.0).unwrap().forward, 0.0);
    assert_eq!(step_gate(7.0, 2, 1.0).unwrap().forward, 1.0);
    assert_eq!(step_gate(2.0, 2, 0.5).unwrap().grad, 0.25 / 0.5);
    assert!(step_gate(2.0, 2, 0.0).is_err());
}

fn spec(t_c: i64) -> GateSpec {
    GateSpec {
        t_c,
        temperature: 1.0,
        source: GateSource::Soft,
    }
}

#[test]
fn hybrid_loss_gating() {
    let mut rng = substream(3, 0, 0);
    let batch: Vec<(Word, Vec<f64>)> = (0..16).map(|_| random_case(&mut rng, 15)).collect();
    let mean_bce = batch.iter().map(|(t, s)| bce_loss(t, s).unwrap()).sum::<f64>() / 16.0;
    let open = hybrid_loss(&batch, &spec(-1)).unwrap();
    assert!((open.total - mean_bce).abs() < 1e-12);
    assert!(open.gate_values.iter().all(|&g| g == 1.0));
    let closed = hybrid_loss(&batch, &spec(15)).unwrap();
    assert_eq!(closed.total, 0.0);
    let mid = hybrid_loss(&batch, &spec(3)).unwrap();
    assert!(mid.total <= open.total);
    for (i, g) in mid.gate_values.iter().enumerate() {
        assert_eq!(*g, if mid.soft_hamming[i] > 3.0 { 1.0 } else { 0.0 });
    }
    let one = hybrid_loss(&batch[..1], &spec(-1)).unwrap();
    assert!((one.total - bce_loss(&batch[0].0, &batch[0].1).unwrap()).abs() < 1e-12);
    assert_eq!(hybrid_loss(&[], &spec(1)).unwrap_err(), Error::EmptyBatch);
}

#[test]
fn hybrid_loss_gradient() {
    let mut rng = substream(4, 0, 0);
    let h = 1e-6;
    let mut checked = 0;
    for _ in 0..40 {
        let batch: Vec<(Word, Vec<f64>)> = (0..3).map(|_| random_case(&mut rng, 7)).collect();
        let gate = spec(2);
        let (base, grads) = hybrid_loss_with_grad(&batch, &gate).unwrap();
        for b in 0..batch.len() {
            for i in 0..7 {
                let mut plus = batch.clone();
                plus[b].1[i] += h;
                let mut minus = batch.clone();
                minus[b].1[i] -= h;
                let lp = hybrid_loss(&plus, &gate).unwrap();
                let lm = hybrid_loss(&minus, &gate).unwrap();
                let s = &batch[b];
                let ts = bipolar(&s.0);
                let sd = base.soft_hamming[b];
                let auto = grads[b][i];
                if lp.gate_values[b] == base.gate_values[b] && lm.gate_values[b] == base.gate_values[b] {
                    let fd = (lp.total - lm.total) / (2.0 * h);
                    // away from a gate transition the STE term adds the proxy slope times bce
                    let g = step_gate(sd, 2, 1.0).unwrap();
                    let dsoft = {
                        let sg = sigmoid(-s.1[i] * ts[i]);
                        -ts[i] * sg * (1.0 - sg)
                    };
                    let ste = g.grad * dsoft * bce_loss(&s.0, &s.1).unwrap() / 3.0;
                    let diff = (auto - ste - fd).abs();
                    assert!(diff <= 1e-6 || diff <= 1e-4 * fd.abs(), "{auto} {ste} {fd}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 500);
}

#[test]
fn integer_gate_uses_sign_errors() {
    let t = Word::from_bits(&[0, 0, 0, 1]);
    let scores = vec![0.1, 0.1, -0.1, -5.0];
    let gate = GateSpec {
        t_c: 0,
        temperature: 1.0,
        source: GateSource::Integer,
    };
    // one sign error: gate open under t_c = 0
    let b = hybrid_loss(&[(t.clone(), scores.clone())], &gate).unwrap();
    assert_eq!(b.gate_values, vec![1.0]);
    let gate1 = GateSpec { t_c: 1, ..gate };
    let b = hybrid_loss(&[(t, scores)], &gate1).unwrap();
    assert_eq!(b.gate_values, vec![0.0]);
    assert_eq!("integer".parse::<GateSource>().unwrap(), GateSource::Integer);
}

#[test]
fn logistic_bound_grid_and_random() {
    for i in 0..10_000 {
        let a = -20.0 + 40.0 * i as f64 / 9_999.0;
        assert!(zero_one(a) <= logistic_bits(a), "{a}");
    }
    assert_eq!(logistic_bits(0.0), 1.0);
    let mut rng = substream(5, 0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(1..64);
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let t: Vec<f64> = (0..n).map(|_| if rng.random() { 1.0 } else { -1.0 }).collect();
        assert!(bound_check(&s, &t).unwrap().holds());
    }
    let kink = bound_check(&[0.0; 6], &[1.0; 6]).unwrap();
    assert_eq!((kink.zero_one_sum, kink.logistic_sum), (6.0, 6.0));
    let good = bound_check(&[40.0; 6], &[1.0; 6]).unwrap();
    assert_eq!(good.zero_one_sum, 0.0);
    assert!(good.logistic_sum < 1e-15);
}

#[test]
fn lemma_noiseless_and_genie() {
    let code = Code::bch(4, 2).unwrap();
    let hdd = BchDecoder::new(&code).unwrap();
    let ident = |s: &crate::channel::ChannelSample| Ok(hard_decision(&s.received));
    let r = lemma1_oracle(&hdd, &ident, 1e-9, 500, 1, 2.576).unwrap();
    assert_eq!((r.lhs.mean, r.rhs.mean), (0.0, 0.0));
    let genie = |s: &crate::channel::ChannelSample| Ok(s.codeword.clone());
    let sigma = sigma_from_ebn0(2.0, code.rate()).unwrap();
    let r = lemma1_oracle(&hdd, &genie, sigma, 20_000, 2, 2.576).unwrap();
    assert_eq!(r.lhs.mean, r.rhs.mean);
    assert_eq!(r.lhs.mean, r.p_bu);
    assert!(r.p_dd > 0.0 && r.p_bu > 0.0);
}

#[test]
fn lemma_identity_and_hdd_are_exact_on_every_frame() {
    for (m, t) in [(3u32, 1usize), (4, 2)] {
        let code = Code::bch(m, t).unwrap();
        let hdd = BchDecoder::new(&code).unwrap();
        let sigma = sigma_from_ebn0(2.0, code.rate()).unwrap();
        let ident = |s: &crate::channel::ChannelSample| Ok(hard_decision(&s.received));
        let via_hdd = |s: &crate::channel::ChannelSample| Ok(hdd.decode(&hard_decision(&s.received)).word);
        for inner in [&ident as &(dyn Fn(&_) -> _ + Sync), &via_hdd] {
            let r = lemma1_oracle(&hdd, inner, sigma, 20_000, 3, 2.576).unwrap();
            assert_eq!(r.disagreeing_frames, 0);
            assert!(r.intervals_overlap());
            let expect = r.p_dd * r.conditional_mean + r.p_bu;
            assert!((r.rhs.mean - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn lemma_random_ecct_runs() {
    let code = Code::bch(3, 1).unwrap();
    let hdd = BchDecoder::new(&code).unwrap();
    let model = EcctModel::new(&code, EcctConfig::default(), 9).unwrap();
    let f = |s: &crate::channel::ChannelSample| model.decode(&s.received);
    let sigma = sigma_from_ebn0(3.0, code.rate()).unwrap();
    let r = lemma1_oracle(&hdd, &f, sigma, 3000, 4, 2.576).unwrap();
    // perfect code: the pre-decoder never fails
    assert_eq!(r.conditioning_frames, 0);
    assert_eq!(r.lhs.mean, r.rhs.mean);
}
