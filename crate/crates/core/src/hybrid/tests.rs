use rand::Rng;

use super::*;
use crate::channel::modulate;
use crate::ecct::EcctConfig;
use crate::hdd::BchDecoder;

fn placements(n: usize, w: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, w: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == w {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, w, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, w, &mut Vec::new(), &mut out);
    out
}

fn flipped(x: &Word, pos: &[usize]) -> Word {
    let mut w = x.clone();
    for &p in pos {
        w.flip(p);
    }
    w
}

#[test]
fn pre_stage_terminates_within_radius() {
    let code = Code::bch(4, 2).unwrap();
    let hdd = BchDecoder::new(&code).unwrap();
    let x = code.encode(&Word::from_u64(0b1010011, 7)).unwrap();
    let mut y = modulate(&x);
    y[3] = -0.2 * y[3];
    y[9] = -0.7 * y[9];
    let mut soft_calls = 0;
    let trace = run_pipeline(PipelineConfig::PRE_POST, &hdd, &y, &mut |_| {
        soft_calls += 1;
        Ok(Word::zeros(15))
    })
    .unwrap();
    assert_eq!(trace.terminating_stage, Stage::Pre);
    assert_eq!(trace.final_word, x);
    assert_eq!(soft_calls, 0);
}

#[test]
fn codeword_from_soft_stage_skips_post() {
    let code = Code::bch(4, 2).unwrap();
    let hdd = BchDecoder::new(&code).unwrap();
    let x = code.encode(&Word::from_u64(0b0000111, 7)).unwrap();
    let y = vec![-0.5; 15];
    let trace = run_pipeline(PipelineConfig::POST, &hdd, &y, &mut |_| Ok(x.clone())).unwrap();
    assert_eq!(trace.terminating_stage, Stage::Ecct);
    assert!(trace.stage(Stage::Post).is_none());
    assert_eq!(trace.final_word, x);
    assert!(trace.final_syndrome_zero);
}

#[test]
fn post_stage_corrects_every_radius_pattern() {
    for (m, t) in [(3u32, 1usize), (4, 2)] {
        let code = Code::bch(m, t).unwrap();
        let hdd = BchDecoder::new(&code).unwrap();
        let mut rng = substream(3, 0, m as u64);
        for _ in 0..4 {
            let x = random_codeword(&code, &mut rng);
            let y: Vec<f64> = modulate(&x).iter().map(|v| v * 0.9).collect();
            for pos in placements(code.n(), code.t_c()) {
                let out = flipped(&x, &pos);
                for cfg in [PipelineConfig::POST, PipelineConfig::PRE_POST] {
                    let mut noisy = y.clone();
                    // make the pre stage fail so the soft stage runs
                    for v in noisy.iter_mut().take(code.t_c() + 3) {
                        *v = -*v;
                    }
                    let trace = run_pipeline(cfg, &hdd, &noisy, &mut |_| Ok(out.clone())).unwrap();
                    if trace.terminating_stage == Stage::Pre {
                        // a perfect code never hands anything past the pre stage
                        continue;
                    }
                    assert_eq!(trace.final_word, x, "{cfg} {pos:?}");
                }
            }
        }
    }
}

#[test]
fn post_only_rescues_one_error_frames() {
    let code = Code::bch(4, 2).unwrap();
    let hdd = BchDecoder::new(&code).unwrap();
    let x = Word::zeros(15);
    let y = modulate(&x);
    let one_off = flipped(&x, &[6]);
    let a = run_pipeline(PipelineConfig::ECCT, &hdd, &y, &mut |_| Ok(one_off.clone())).unwrap();
    let b = run_pipeline(PipelineConfig::POST, &hdd, &y, &mut |_| Ok(one_off.clone())).unwrap();
    assert_ne!(a.final_word, x);
    assert!(!a.final_syndrome_zero);
    assert_eq!(b.final_word, x);
}

#[test]
fn traces_are_consistent() {
    let code = Code::bch(4, 2).unwrap();
    let hdd = BchDecoder::new(&code).unwrap();
    let mut rng = substream(8, 0, 0);
    let order = |s: Stage| match s {
        Stage::Pre => 0,
        Stage::Ecct => 1,
        Stage::Post => 2,
    };
    for _ in 0..2000 {
        let x = random_codeword(&code, &mut rng);
        let s = transmit(&x, 0.9, &mut rng).unwrap();
        let soft_out = Word::from_bools((0..15).map(|_| rng.random::<bool>()));
        for cfg in PipelineConfig::ALL {
            let tr = run_pipeline(cfg, &hdd, &s.received, &mut |_| Ok(soft_out.clone())).unwrap();
            let last = tr.stages.last().unwrap();
            assert_eq!(last.stage, tr.terminating_stage);
            assert_eq!(last.word, tr.final_word);
            assert!(tr.stages.windows(2).all(|w| order(w[0].stage) < order(w[1].stage)));
            assert_eq!(tr.final_syndrome_zero, code.is_codeword(&tr.final_word).unwrap());
            assert_eq!(cfg.use_pre, tr.stage(Stage::Pre).is_some());
            if cfg.use_pre && s.hard_errors() <= code.t_c() {
                assert_eq!(tr.final_word, x);
            }
        }
    }
}

#[test]
fn pipeline_names_round_trip() {
    for cfg in PipelineConfig::ALL {
        assert_eq!(cfg.to_string().parse::<PipelineConfig>().unwrap(), cfg);
    }
    assert_eq!(PipelineConfig::PRE_POST.to_string(), "pre+ecct+post");
    assert!("post".parse::<PipelineConfig>().is_err());
}

#[test]
fn random_ecct_dominance() {
    let code = Code::bch(4, 2).unwrap();
    let hdd = BchDecoder::new(&code).unwrap();
    let model = EcctModel::new(&code, EcctConfig::default(), 5).unwrap();
    let sigma = crate::channel::sigma_from_ebn0(4.0, code.rate()).unwrap();
    let rep = per_frame_dominance_check(&model, &hdd, false, sigma, 2000, 1).unwrap();
    assert!(rep.holds(), "{rep:?}");
    assert!(rep.rescuable > 0);
    let rep = per_frame_dominance_check(&HardDecisionDecoder, &hdd, false, sigma, 5000, 2).unwrap();
    assert!(rep.holds(), "{rep:?}");
    assert!(rep.errors_with_post < rep.errors_without_post);
}
