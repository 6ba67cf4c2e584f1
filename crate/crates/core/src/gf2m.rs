//! Arithmetic over GF(2^m) and GF(2)[x].
//!
//! Elements are stored in polynomial basis. Each field is built once from a
//! fixed primitive polynomial and cached, so multiplication and inversion are
//! table lookups.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Largest supported extension degree.
pub const MAX_M: u32 = 16;

/// Primitive polynomials indexed by `m`, bit `i` holding the coefficient of `x^i`.
pub const PRIMITIVE_POLYS: [u32; 17] = [
    0,
    0,
    0b111,       // x^2+x+1
    0b1011,      // x^3+x+1
    0b1_0011,    // x^4+x+1
    0b10_0101,   // x^5+x^2+1
    0b100_0011,  // x^6+x+1
    0b1000_1001, // x^7+x^3+1
    0x11D,       // x^8+x^4+x^3+x^2+1
    0x211,       // x^9+x^4+1
    0x409,       // x^10+x^3+1
    0x805,       // x^11+x^2+1
    0x1053,      // x^12+x^6+x^4+x+1
    0x201B,      // x^13+x^4+x^3+x+1
    0x4443,      // x^14+x^10+x^6+x+1
    0x8003,      // x^15+x+1
    0x1100B,     // x^16+x^12+x^3+x+1
];

/// An element of GF(2^m) tagged with its field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GfElement {
    value: u16,
    m: u8,
}

impl GfElement {
    pub fn value(self) -> u16 {
        self.value
    }

    pub fn m(self) -> u32 {
        self.m as u32
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }
}

/// GF(2^m) with log/antilog tables.
#[derive(Debug, Clone)]
pub struct GaloisField {
    m: u32,
    prim: u32,
    // exp has 2*(order-1) entries so that exp[log a + log b] needs no reduction.
    exp: Vec<u16>,
    log: Vec<u16>,
}

static FIELDS: [OnceLock<GaloisField>; 17] = [const { OnceLock::new() }; 17];

/// Returns the cached field GF(2^m).
pub fn field(m: u32) -> Result<&'static GaloisField> {
    if !(2..=MAX_M).contains(&m) {
        return Err(Error::UnsupportedField(m));
    }
    Ok(FIELDS[m as usize].get_or_init(|| GaloisField::build(m)))
}

impl GaloisField {
    fn build(m: u32) -> Self {
        let prim = PRIMITIVE_POLYS[m as usize];
        let size = 1usize << m;
        let q = size - 1;
        let mut exp = vec![0u16; 2 * q];
        let mut log = vec![0u16; size];
        let mut x: u32 = 1;
        for (i, e) in exp.iter_mut().take(q).enumerate() {
            *e = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & (1 << m) != 0 {
                x ^= prim;
            }
        }
        assert_eq!(x, 1, "polynomial {prim:#x} is not primitive for m={m}");
        for i in q..2 * q {
            exp[i] = exp[i - q];
        }
        GaloisField { m, prim, exp, log }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Primitive polynomial as a bit mask including the `x^m` term.
    pub fn primitive_poly(&self) -> u32 {
        self.prim
    }

    /// Multiplicative group order, 2^m - 1.
    pub fn group_order(&self) -> usize {
        (1usize << self.m) - 1
    }

    pub fn element(&self, value: u32) -> Result<GfElement> {
        if value >> self.m != 0 {
            return Err(Error::NotInField { value, m: self.m });
        }
        Ok(GfElement {
            value: value as u16,
            m: self.m as u8,
        })
    }

    pub fn zero(&self) -> GfElement {
        GfElement {
            value: 0,
            m: self.m as u8,
        }
    }

    pub fn one(&self) -> GfElement {
        GfElement {
            value: 1,
            m: self.m as u8,
        }
    }

    /// `alpha^power`, with the exponent reduced modulo 2^m - 1.
    pub fn alpha_pow(&self, power: i64) -> GfElement {
        GfElement {
            value: self.exp_raw(power),
            m: self.m as u8,
        }
    }

    fn check(&self, a: GfElement) -> Result<()> {
        if a.m() != self.m {
            return Err(Error::FieldMismatch {
                left: a.m(),
                right: self.m,
            });
        }
        Ok(())
    }

    pub fn add(&self, a: GfElement, b: GfElement) -> Result<GfElement> {
        self.check(a)?;
        self.check(b)?;
        Ok(GfElement {
            value: a.value ^ b.value,
            m: a.m,
        })
    }

    pub fn mul(&self, a: GfElement, b: GfElement) -> Result<GfElement> {
        self.check(a)?;
        self.check(b)?;
        Ok(GfElement {
            value: self.mul_raw(a.value, b.value),
            m: a.m,
        })
    }

    pub fn inv(&self, a: GfElement) -> Result<GfElement> {
        self.check(a)?;
        if a.value == 0 {
            return Err(Error::ZeroInverse);
        }
        Ok(GfElement {
            value: self.inv_raw(a.value),
            m: a.m,
        })
    }

    /// Discrete log of a nonzero element.
    pub fn log(&self, a: GfElement) -> Result<usize> {
        self.check(a)?;
        if a.value == 0 {
            return Err(Error::InvalidArgument("log of zero".into()));
        }
        Ok(self.log[a.value as usize] as usize)
    }

    #[inline]
    pub fn exp_raw(&self, power: i64) -> u16 {
        let q = self.group_order() as i64;
        self.exp[power.rem_euclid(q) as usize]
    }

    #[inline]
    pub fn log_raw(&self, a: u16) -> usize {
        self.log[a as usize] as usize
    }

    #[inline]
    pub fn mul_raw(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    /// Inverse of a nonzero raw element. Zero maps to zero.
    #[inline]
    pub fn inv_raw(&self, a: u16) -> u16 {
        if a == 0 {
            return 0;
        }
        let q = self.group_order();
        self.exp[(q - self.log[a as usize] as usize) % q]
    }
}

/// Polynomial over GF(2), coefficients stored low degree first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinPoly {
    coeffs: Vec<bool>,
}

impl BinPoly {
    pub fn zero() -> Self {
        BinPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        BinPoly { coeffs: vec![true] }
    }

    /// Builds a polynomial from coefficients, lowest degree first.
    pub fn from_coeffs(coeffs: impl IntoIterator<Item = bool>) -> Self {
        let mut p = BinPoly {
            coeffs: coeffs.into_iter().collect(),
        };
        p.trim();
        p
    }

    /// Builds `sum x^e` over the given exponents (repeated exponents cancel).
    pub fn from_exponents(exps: &[usize]) -> Self {
        let len = exps.iter().max().map_or(0, |&e| e + 1);
        let mut coeffs = vec![false; len];
        for &e in exps {
            coeffs[e] ^= true;
        }
        Self::from_coeffs(coeffs)
    }

    /// `x^n + 1`.
    pub fn x_pow_plus_one(n: usize) -> Self {
        Self::from_exponents(&[0, n])
    }

    fn trim(&mut self) {
        while self.coeffs.last() == Some(&false) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeff(&self, i: usize) -> bool {
        self.coeffs.get(i).copied().unwrap_or(false)
    }

    pub fn coeffs(&self) -> &[bool] {
        &self.coeffs
    }

    pub fn mul(&self, other: &BinPoly) -> BinPoly {
        if self.is_zero() || other.is_zero() {
            return BinPoly::zero();
        }
        let mut out = vec![false; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a {
                for (j, &b) in other.coeffs.iter().enumerate() {
                    out[i + j] ^= b;
                }
            }
        }
        BinPoly::from_coeffs(out)
    }

    /// Remainder of division by `divisor`.
    pub fn rem(&self, divisor: &BinPoly) -> Result<BinPoly> {
        let dd = divisor
            .degree()
            .ok_or_else(|| Error::InvalidArgument("division by zero polynomial".into()))?;
        let mut r = self.coeffs.clone();
        while r.len() > dd {
            let top = r.len() - 1;
            if r[top] {
                let shift = top - dd;
                for (j, &b) in divisor.coeffs.iter().enumerate() {
                    r[shift + j] ^= b;
                }
            }
            r.pop();
        }
        Ok(BinPoly::from_coeffs(r))
    }

    pub fn divides(&self, other: &BinPoly) -> Result<bool> {
        Ok(other.rem(self)?.is_zero())
    }

    /// Evaluates the polynomial at a field element.
    pub fn eval(&self, gf: &GaloisField, at: GfElement) -> Result<GfElement> {
        if at.m() != gf.m() {
            return Err(Error::FieldMismatch {
                left: at.m(),
                right: gf.m(),
            });
        }
        let mut acc = 0u16;
        for &c in self.coeffs.iter().rev() {
            acc = gf.mul_raw(acc, at.value()) ^ c as u16;
        }
        gf.element(acc as u32)
    }
}

impl fmt::Debug for BinPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinPoly({self})")
    }
}

impl fmt::Display for BinPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = (0..self.coeffs.len())
            .rev()
            .filter(|&i| self.coeffs[i])
            .map(|i| match i {
                0 => "1".to_string(),
                1 => "x".to_string(),
                _ => format!("x^{i}"),
            })
            .collect();
        write!(f, "{}", terms.join("+"))
    }
}

/// Cyclotomic coset of `power` under doubling modulo 2^m - 1.
pub fn cyclotomic_coset(power: usize, m: u32) -> Vec<usize> {
    let q = (1usize << m) - 1;
    let start = power % q;
    let mut coset = vec![start];
    let mut e = (start * 2) % q;
    while e != start {
        coset.push(e);
        e = (e * 2) % q;
    }
    coset
}

/// Minimal polynomial over GF(2) of `alpha^alpha_power`, computed as the
/// product of `(x + beta)` over the conjugates `beta` of the element.
pub fn minimal_polynomial(alpha_power: usize, m: u32) -> Result<BinPoly> {
    let gf = field(m)?;
    if alpha_power >= gf.group_order() {
        return Err(Error::InvalidArgument(format!(
            "alpha power {alpha_power} out of range for m={m}"
        )));
    }
    // Product in GF(2^m)[x], coefficients low degree first.
    let mut prod: Vec<u16> = vec![1];
    for e in cyclotomic_coset(alpha_power, m) {
        let root = gf.exp_raw(e as i64);
        let mut next = vec![0u16; prod.len() + 1];
        for (i, &c) in prod.iter().enumerate() {
            next[i + 1] ^= c;
            next[i] ^= gf.mul_raw(c, root);
        }
        prod = next;
    }
    let mut coeffs = Vec::with_capacity(prod.len());
    for c in prod {
        match c {
            0 => coeffs.push(false),
            1 => coeffs.push(true),
            _ => {
                return Err(Error::InvalidDesign(
                    "conjugate product has a coefficient outside GF(2)".into(),
                ))
            }
        }
    }
    Ok(BinPoly::from_coeffs(coeffs))
}

/// Generator polynomial of the narrow-sense primitive binary BCH code of
/// length 2^m - 1 with designed distance 2t+1: the lcm of the minimal
/// polynomials of `alpha^1 .. alpha^{2t}`.
pub fn bch_generator(m: u32, t: usize) -> Result<BinPoly> {
    let gf = field(m)?;
    let n = gf.group_order();
    if t == 0 {
        return Err(Error::InvalidDesign("t must be at least 1".into()));
    }
    let mut covered = vec![false; n];
    let mut g = BinPoly::one();
    for i in 1..=2 * t {
        let e = i % n;
        if covered[e] {
            continue;
        }
        for c in cyclotomic_coset(e, m) {
            covered[c] = true;
        }
        g = g.mul(&minimal_polynomial(e, m)?);
    }
    let deg = g.degree().unwrap_or(0);
    if deg >= n {
        return Err(Error::InvalidDesign(format!(
            "generator degree {deg} leaves no information bits for n={n}, t={t}"
        )));
    }
    Ok(g)
}
