//! BPSK over AWGN, SNR conversion and multiplicative-noise targets.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::code::{Code, Word};
use crate::error::{Error, Result};

/// +1 for nonnegative input, -1 otherwise.
#[inline]
pub fn sign(a: f64) -> f64 {
    if a >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Maps +1 to 0 and -1 to 1.
#[inline]
pub fn bin(a: f64) -> u8 {
    (0.5 * (1.0 - a)) as u8
}

/// Bit 0 to +1, bit 1 to -1.
pub fn modulate(x: &Word) -> Vec<f64> {
    x.iter().map(|b| if b { -1.0 } else { 1.0 }).collect()
}

/// `bin(sign(y))` elementwise.
pub fn hard_decision(y: &[f64]) -> Word {
    Word::from_bools(y.iter().map(|&v| v < 0.0))
}

/// Noise standard deviation for an Eb/N0 in dB at the given code rate:
/// `sigma = 1 / sqrt(2 * rate * 10^(ebn0/10))`.
pub fn sigma_from_ebn0(ebn0_db: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidArgument(format!("rate {rate} outside (0, 1]")));
    }
    Ok(1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0)).sqrt())
}

/// Gaussian tail probability, `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Raw bit-flip probability of hard decisions at noise level `sigma`.
pub fn bit_flip_probability(sigma: f64) -> f64 {
    q_function(1.0 / sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub ebn0_db: f64,
    pub rate: f64,
    pub sigma: f64,
}

impl SnrPoint {
    pub fn new(ebn0_db: f64, rate: f64) -> Result<Self> {
        Ok(SnrPoint {
            ebn0_db,
            rate,
            sigma: sigma_from_ebn0(ebn0_db, rate)?,
        })
    }
}

/// One transmission of a codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub codeword: Word,
    pub modulated: Vec<f64>,
    pub noise: Vec<f64>,
    pub received: Vec<f64>,
    pub sigma: f64,
    /// `received / modulated`, elementwise.
    pub multiplicative_noise: Vec<f64>,
    /// `bin(sign(multiplicative_noise))`: 1 exactly where the hard decision is wrong.
    pub target: Word,
}

impl ChannelSample {
    /// Builds a sample from a codeword and an explicit noise vector.
    pub fn from_noise(codeword: Word, noise: Vec<f64>, sigma: f64) -> Result<Self> {
        if noise.len() != codeword.len() {
            return Err(Error::LengthMismatch {
                expected: codeword.len(),
                actual: noise.len(),
            });
        }
        let modulated = modulate(&codeword);
        let received: Vec<f64> = modulated.iter().zip(&noise).map(|(s, z)| s + z).collect();
        let multiplicative_noise: Vec<f64> =
            received.iter().zip(&modulated).map(|(y, s)| y / s).collect();
        let target = hard_decision(&multiplicative_noise);
        Ok(ChannelSample {
            codeword,
            modulated,
            noise,
            received,
            sigma,
            multiplicative_noise,
            target,
        })
    }

    pub fn hard_decision(&self) -> Word {
        hard_decision(&self.received)
    }

    /// Number of hard-decision errors, `d_H(x, bin(sign(y)))`.
    pub fn hard_errors(&self) -> usize {
        self.target.weight()
    }
}

/// Sends `x` through BPSK/AWGN with standard deviation `sigma`.
pub fn transmit<R: Rng + ?Sized>(x: &Word, sigma: f64, rng: &mut R) -> Result<ChannelSample> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let noise = (0..x.len())
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    ChannelSample::from_noise(x.clone(), noise, sigma)
}

/// Uniformly random codeword.
pub fn random_codeword<R: Rng + ?Sized>(code: &Code, rng: &mut R) -> Word {
    let msg = Word::from_bools((0..code.k()).map(|_| rng.random::<bool>()));
    code.encode(&msg).expect("message length equals k")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;

    #[test]
    fn sign_and_bin() {
        assert_eq!(bin(sign(0.7)), 0);
        assert_eq!(bin(sign(-0.2)), 1);
        assert_eq!(sign(0.0), 1.0);
        assert_eq!(sign(-0.0), 1.0);
    }

    #[test]
    fn modulate_examples() {
        assert!(modulate(&Word::zeros(5)).iter().all(|&v| v == 1.0));
        let x: Word = "1010".parse().unwrap();
        assert_eq!(modulate(&x), vec![-1.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn sigma_examples() {
        assert!((sigma_from_ebn0(0.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((sigma_from_ebn0(10.0, 0.5).unwrap() - 1.0 / 10f64.sqrt()).abs() < 1e-15);
        assert!(sigma_from_ebn0(3.0, 0.5).unwrap() > sigma_from_ebn0(4.0, 0.5).unwrap());
        assert!(sigma_from_ebn0(1.0, 0.0).is_err());
        assert!(sigma_from_ebn0(1.0, -0.5).is_err());
    }

    #[test]
    fn q_function_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        // Q(1.959963984540054) = 0.025
        assert!((q_function(1.959_963_984_540_054) - 0.025).abs() < 1e-12);
    }

    #[test]
    fn tiny_sigma_hard_decision_is_codeword() {
        let code = Code::bch(4, 2).unwrap();
        let mut rng = substream(1, 0, 0);
        for _ in 0..50 {
            let x = random_codeword(&code, &mut rng);
            let s = transmit(&x, 1e-9, &mut rng).unwrap();
            assert_eq!(s.hard_decision(), x);
        }
        assert!(transmit(&Word::zeros(3), 0.0, &mut rng).is_err());
    }

    #[test]
    fn transmit_is_reproducible() {
        let x: Word = "1011001".parse().unwrap();
        let a = transmit(&x, 0.8, &mut substream(3, 9, 1)).unwrap();
        let b = transmit(&x, 0.8, &mut substream(3, 9, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_moments() {
        let sigma = 0.7;
        let mut rng = substream(11, 0, 0);
        let n = 1_000_000usize;
        let x = Word::zeros(n);
        let s = transmit(&x, sigma, &mut rng).unwrap();
        let mean = s.noise.iter().sum::<f64>() / n as f64;
        let var = s.noise.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let var_true = sigma * sigma;
        assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt());
        // standard error of the sample variance is sigma^2 sqrt(2/(n-1))
        assert!((var - var_true).abs() < 3.0 * var_true * (2.0 / (n - 1) as f64).sqrt());
    }

    #[test]
    fn flip_rate_matches_q() {
        let sigma = 0.8;
        let n = 400_000usize;
        let s = transmit(&Word::zeros(n), sigma, &mut substream(12, 0, 0)).unwrap();
        let p = bit_flip_probability(sigma);
        let rate = s.hard_errors() as f64 / n as f64;
        assert!((rate - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    proptest! {
        #[test]
        fn sample_invariants(bits in prop::collection::vec(0u8..2, 1..64), seed in any::<u64>(), sigma in 0.1f64..2.0) {
            let x = Word::from_bits(&bits);
            prop_assert_eq!(hard_decision(&modulate(&x)), x.clone());
            let s = transmit(&x, sigma, &mut substream(seed, 0, 0)).unwrap();
            for i in 0..x.len() {
                prop_assert!((s.received[i] - (s.modulated[i] + s.noise[i])).abs() < 1e-15);
                prop_assert_eq!(s.target.get(i), x.get(i) ^ s.hard_decision().get(i));
            }
        }
    }
}
