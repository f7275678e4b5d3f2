//! Parameter sequences `p_n, q_n, k_n, l_n, s_n` and the modular tables `j_i`.
//!
//! Everything here is exact. `p_n` and `q_n` grow doubly exponentially, so they
//! are stored as big integers and only narrowed to machine words when a table
//! indexed by `0..q` has to be materialised.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParamsError {
    #[error("k and l must both be at least 2 (got k={k}, l={l})")]
    BelowMinimum { k: u64, l: u64 },
    #[error("s_next={s_next} is not a multiple of s={s}")]
    SNotMultiple { s: u64, s_next: u64 },
    #[error("s={s} does not divide k={k}")]
    SDoesNotDivideK { s: u64, k: u64 },
    #[error("s must be at least 1")]
    ZeroS,
    #[error("gcd(p, q) = {gcd} != 1 for p={p}, q={q}")]
    NotCoprime { p: String, q: String, gcd: String },
    #[error("q={0} is too large to tabulate")]
    TooLarge(String),
    #[error("schedule lengths disagree: {0}")]
    Schedule(String),
    #[error("cannot parse rational {0:?}")]
    Parse(String),
}

/// Reduced rational with positive denominator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BigRatio(BigRational);

impl BigRatio {
    pub fn new(num: BigInt, den: BigInt) -> Self {
        // BigRational::new reduces and normalises the sign onto the numerator.
        BigRatio(BigRational::new(num, den))
    }

    pub fn from_uints(num: &BigUint, den: &BigUint) -> Self {
        Self::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }

    /// Nearest double; loses precision once the denominator exceeds 2^53.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Representative in `[0, 1)`.
    pub fn frac(&self) -> BigRatio {
        let floor = self.0.floor();
        BigRatio(&self.0 - floor)
    }
}

impl std::ops::Sub for &BigRatio {
    type Output = BigRatio;
    fn sub(self, rhs: &BigRatio) -> BigRatio {
        BigRatio(&self.0 - &rhs.0)
    }
}

impl fmt::Display for BigRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for BigRatio {
    type Err = ParamsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParamsError::Parse(s.to_string());
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        let n: BigInt = n.parse().map_err(|_| bad())?;
        let d: BigInt = d.parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        Ok(BigRatio::new(n, d))
    }
}

impl Serialize for BigRatio {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BigRatio {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

mod decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One stage of the parameter sequence.
///
/// `k` and `l` are the parameters that lead *out of* stage `n` into stage
/// `n + 1`; they are `None` on the last built stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageParams {
    pub n: usize,
    pub k: Option<u64>,
    pub l: Option<u64>,
    pub s: u64,
    #[serde(with = "decimal")]
    pub p: BigUint,
    #[serde(with = "decimal")]
    pub q: BigUint,
}

impl StageParams {
    /// Stage 0: `p_0 = q_0 = 1`.
    pub fn initial(s0: u64) -> Result<Self, ParamsError> {
        if s0 == 0 {
            return Err(ParamsError::ZeroS);
        }
        Ok(StageParams { n: 0, k: None, l: None, s: s0, p: BigUint::one(), q: BigUint::one() })
    }

    pub fn alpha(&self) -> BigRatio {
        BigRatio::from_uints(&self.p, &self.q)
    }

    pub fn q_u64(&self) -> Result<u64, ParamsError> {
        self.q.to_u64().ok_or_else(|| ParamsError::TooLarge(self.q.to_string()))
    }

    pub fn p_u64(&self) -> Result<u64, ParamsError> {
        self.p.to_u64().ok_or_else(|| ParamsError::TooLarge(self.p.to_string()))
    }

    /// `k` with the outgoing parameters attached.
    pub fn with_outgoing(mut self, k: u64, l: u64) -> Self {
        self.k = Some(k);
        self.l = Some(l);
        self
    }
}

/// Next stage via `p' = p q k l + 1`, `q' = k l q^2`.
pub fn advance(prev: &StageParams, k: u64, l: u64, s_next: u64) -> Result<StageParams, ParamsError> {
    if k < 2 || l < 2 {
        return Err(ParamsError::BelowMinimum { k, l });
    }
    if prev.s == 0 || s_next == 0 {
        return Err(ParamsError::ZeroS);
    }
    if s_next % prev.s != 0 {
        return Err(ParamsError::SNotMultiple { s: prev.s, s_next });
    }
    if k % prev.s != 0 {
        return Err(ParamsError::SDoesNotDivideK { s: prev.s, k });
    }
    let kl = BigUint::from(k) * BigUint::from(l);
    let p = &prev.p * &prev.q * &kl + BigUint::one();
    let q = &kl * &prev.q * &prev.q;
    check_coprime(&p, &q)?;
    Ok(StageParams { n: prev.n + 1, k: None, l: None, s: s_next, p, q })
}

fn check_coprime(p: &BigUint, q: &BigUint) -> Result<(), ParamsError> {
    let g = p.gcd(q);
    if g.is_one() {
        Ok(())
    } else {
        Err(ParamsError::NotCoprime { p: p.to_string(), q: q.to_string(), gcd: g.to_string() })
    }
}

/// Builds the whole schedule; `ss` includes `s_0`, so `ss.len() == ks.len() + 1`.
pub fn schedule(ks: &[u64], ls: &[u64], ss: &[u64]) -> Result<Vec<StageParams>, ParamsError> {
    if ks.len() != ls.len() || ss.len() != ks.len() + 1 {
        return Err(ParamsError::Schedule(format!(
            "{} k values, {} l values, {} s values (need n, n, n+1)",
            ks.len(),
            ls.len(),
            ss.len()
        )));
    }
    let mut out = vec![StageParams::initial(ss[0])?];
    for i in 0..ks.len() {
        let next = advance(&out[i], ks[i], ls[i], ss[i + 1])?;
        let cur = out.pop().expect("nonempty").with_outgoing(ks[i], ls[i]);
        out.push(cur);
        out.push(next);
    }
    Ok(out)
}

/// Inverse of `p` modulo `q`, in `[0, q)`.
pub fn mod_inverse(p: &BigUint, q: &BigUint) -> Result<BigUint, ParamsError> {
    if q.is_one() {
        return Ok(BigUint::zero());
    }
    let (p_i, q_i) = (BigInt::from(p.clone()), BigInt::from(q.clone()));
    let eg = p_i.extended_gcd(&q_i);
    if !eg.gcd.is_one() {
        return Err(ParamsError::NotCoprime { p: p.to_string(), q: q.to_string(), gcd: eg.gcd.to_string() });
    }
    let inv = eg.x.mod_floor(&q_i);
    let inv = inv.to_biguint().expect("mod_floor of positive modulus is nonnegative");
    if !(p * &inv % q).is_one() {
        return Err(ParamsError::NotCoprime { p: p.to_string(), q: q.to_string(), gcd: "?".into() });
    }
    Ok(inv)
}

/// `j_i = p^{-1} i mod q` for `i = 0..q`, each entry verified by multiplication.
pub fn j_table(p: &BigUint, q: &BigUint) -> Result<Vec<u64>, ParamsError> {
    if q.is_zero() {
        return Err(ParamsError::TooLarge("0".into()));
    }
    let qq = q.to_u64().filter(|&v| v <= u32::MAX as u64).ok_or_else(|| ParamsError::TooLarge(q.to_string()))?;
    let inv = mod_inverse(p, q)?.to_u64().expect("inverse < q");
    let p_mod = (p % q).to_u64().expect("residue < q");
    let mut table = Vec::with_capacity(qq as usize);
    let mut j = 0u64;
    for i in 0..qq {
        if (p_mod as u128 * j as u128) % qq as u128 != i as u128 {
            return Err(ParamsError::NotCoprime { p: p.to_string(), q: q.to_string(), gcd: "?".into() });
        }
        table.push(j);
        j = (j + inv) % qq;
    }
    Ok(table)
}

/// Small-integer convenience wrapper around [`j_table`].
pub fn j_table_u64(p: u64, q: u64) -> Result<Vec<u64>, ParamsError> {
    j_table(&BigUint::from(p), &BigUint::from(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(p: u64, q: u64, s: u64) -> StageParams {
        StageParams { n: 0, k: None, l: None, s, p: p.into(), q: q.into() }
    }

    #[test]
    fn advance_examples() {
        let a = advance(&st(1, 1, 1), 2, 2, 1).unwrap();
        assert_eq!((a.p, a.q), (5u32.into(), 4u32.into()));
        let b = advance(&st(5, 4, 1), 2, 3, 1).unwrap();
        assert_eq!((b.p.clone(), b.q.clone()), (121u32.into(), 96u32.into()));
        assert!(b.p.gcd(&b.q).is_one());
        assert_eq!(advance(&st(1, 1, 1), 1, 1, 1), Err(ParamsError::BelowMinimum { k: 1, l: 1 }));
    }

    #[test]
    fn advance_divisibility() {
        assert!(matches!(advance(&st(1, 1, 2), 2, 2, 3), Err(ParamsError::SNotMultiple { .. })));
        assert!(matches!(advance(&st(1, 1, 2), 3, 2, 2), Err(ParamsError::SDoesNotDivideK { .. })));
    }

    #[test]
    fn j_table_examples() {
        assert_eq!(j_table_u64(3, 5).unwrap(), vec![0, 2, 4, 1, 3]);
        assert_eq!(j_table_u64(1, 4).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(j_table_u64(5, 8).unwrap(), vec![0, 5, 2, 7, 4, 1, 6, 3]);
        assert!(j_table_u64(2, 4).is_err());
        assert_eq!(j_table_u64(7, 1).unwrap(), vec![0]);
    }

    #[test]
    fn json_round_trip() {
        let sched = schedule(&[2, 2], &[2, 4], &[2, 2, 2]).unwrap();
        assert_eq!(sched[1].p, 5u32.into());
        assert_eq!(sched[2].q, 128u32.into());
        assert_eq!(sched[2].p, 161u32.into());
        let js = serde_json::to_string(&sched[1]).unwrap();
        assert_eq!(js, r#"{"n":1,"k":2,"l":4,"s":2,"p":"5","q":"4"}"#);
        let back: StageParams = serde_json::from_str(&js).unwrap();
        assert_eq!(back, sched[1]);
    }

    #[test]
    fn ratio_parse_and_frac() {
        let r: BigRatio = "10/4".parse().unwrap();
        assert_eq!(r.to_string(), "5/2");
        assert_eq!(r.frac().to_string(), "1/2");
        assert!("1/0".parse::<BigRatio>().is_err());
    }
}
