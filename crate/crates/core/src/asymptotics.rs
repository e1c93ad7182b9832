//! Empirical growth estimates: fitting `a_n ~ C mu^n n^theta` to a finite
//! prefix of a sequence.
//!
//! The counts outgrow `f64` mantissas long before the interesting range, so
//! all arithmetic runs in [`Real`], a binary fixed-point type with a few
//! hundred bits after the point. Results are rounded to `f64` at the end.
//! The estimates are empirical; nothing here claims they converge.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Fractional bits carried by [`Real`].
const FRAC_BITS: u64 = 320;

/// Fixed-point real number `mantissa / 2^FRAC_BITS` (about 96 decimal
/// digits after the point).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Real {
    mantissa: BigInt,
}

impl Real {
    pub fn zero() -> Self {
        Real {
            mantissa: BigInt::zero(),
        }
    }

    pub fn one() -> Self {
        Real::from_int(1)
    }

    pub fn from_int(x: i64) -> Self {
        Real {
            mantissa: BigInt::from(x) << FRAC_BITS,
        }
    }

    pub fn from_biguint(x: &BigUint) -> Self {
        Real {
            mantissa: BigInt::from(x.clone()) << FRAC_BITS,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.mantissa.is_positive()
    }

    pub fn add(&self, other: &Real) -> Real {
        Real {
            mantissa: &self.mantissa + &other.mantissa,
        }
    }

    pub fn sub(&self, other: &Real) -> Real {
        Real {
            mantissa: &self.mantissa - &other.mantissa,
        }
    }

    pub fn mul(&self, other: &Real) -> Real {
        Real {
            mantissa: (&self.mantissa * &other.mantissa) >> FRAC_BITS,
        }
    }

    pub fn div(&self, other: &Real) -> Result<Real> {
        if other.mantissa.is_zero() {
            return Err(Error::invalid("division by zero"));
        }
        Ok(Real {
            mantissa: (&self.mantissa << FRAC_BITS) / &other.mantissa,
        })
    }

    fn mul_int(&self, k: i64) -> Real {
        Real {
            mantissa: &self.mantissa * k,
        }
    }

    fn div_int(&self, k: i64) -> Real {
        Real {
            mantissa: &self.mantissa / k,
        }
    }

    fn shl(&self, bits: i64) -> Real {
        let mantissa = if bits >= 0 {
            &self.mantissa << bits as u64
        } else {
            &self.mantissa >> (-bits) as u64
        };
        Real { mantissa }
    }

    /// `2 atanh(z) = ln((1+z)/(1-z))` for small `|z|`.
    fn two_atanh(z: &Real) -> Real {
        let z2 = z.mul(z);
        let mut term = z.clone();
        let mut sum = Real::zero();
        let mut k = 1i64;
        while !term.mantissa.is_zero() {
            sum = sum.add(&term.div_int(k));
            term = term.mul(&z2);
            k += 2;
        }
        sum.mul_int(2)
    }

    fn ln2() -> Real {
        Real::two_atanh(&Real::one().div_int(3))
    }

    /// Natural logarithm; `self` must be positive.
    pub fn ln(&self) -> Result<Real> {
        if !self.is_positive() {
            return Err(Error::invalid("logarithm of a non-positive number"));
        }
        // self = m * 2^e with m in [1, 2)
        let e = self.mantissa.bits() as i64 - 1 - FRAC_BITS as i64;
        let m = self.shl(-e);
        let one = Real::one();
        let z = m.sub(&one).div(&m.add(&one))?;
        Ok(Real::two_atanh(&z).add(&Real::ln2().mul_int(e)))
    }

    pub fn exp(&self) -> Real {
        let ln2 = Real::ln2();
        let k = self.div(&ln2).expect("ln 2 is non-zero").round_to_i64();
        let r = self.sub(&ln2.mul_int(k));
        let mut term = Real::one();
        let mut sum = Real::zero();
        let mut i = 1i64;
        while !term.mantissa.is_zero() {
            sum = sum.add(&term);
            term = term.mul(&r).div_int(i);
            i += 1;
        }
        sum.shl(k)
    }

    pub fn powf(&self, exponent: &Real) -> Result<Real> {
        Ok(self.ln()?.mul(exponent).exp())
    }

    fn round_to_i64(&self) -> i64 {
        let half = BigInt::one() << (FRAC_BITS - 1);
        let rounded = (&self.mantissa + half) >> FRAC_BITS;
        rounded.to_i64().expect("exponent range")
    }

    pub fn to_f64(&self) -> f64 {
        let bits = self.mantissa.bits();
        let shift = bits.saturating_sub(60);
        let top = (&self.mantissa >> shift).to_f64().unwrap_or(f64::NAN);
        top * 2f64.powi(shift as i32 - FRAC_BITS as i32)
    }

    /// Relative distance `|self - other| / |other|`.
    pub fn relative_error(&self, other: &Real) -> f64 {
        let diff = self.sub(other);
        match diff.div(other) {
            Ok(q) => q.to_f64().abs(),
            Err(_) => f64::INFINITY,
        }
    }
}

impl FromStr for Real {
    type Err = Error;

    /// Parses an optionally signed decimal such as `-12.5e3`.
    fn from_str(s: &str) -> Result<Real> {
        let bad = || Error::invalid(format!("not a decimal number: {s:?}"));
        let s = s.trim();
        let (body, exp10) = match s.find(['e', 'E']) {
            Some(pos) => (&s[..pos], s[pos + 1..].parse::<i64>().map_err(|_| bad())?),
            None => (s, 0),
        };
        let (negative, body) = match body.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, body.strip_prefix('+').unwrap_or(body)),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let digits = format!("{int_part}{frac_part}");
        if !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let mut value = BigInt::from_str(&digits).map_err(|_| bad())? << FRAC_BITS;
        let scale = exp10 - frac_part.len() as i64;
        let ten = BigInt::from(10u8);
        if scale >= 0 {
            value *= num_traits::pow(ten, scale as usize);
        } else {
            value /= num_traits::pow(ten, (-scale) as usize);
        }
        if negative {
            value = -value;
        }
        Ok(Real { mantissa: value })
    }
}

impl fmt::Display for Real {
    /// Prints 30 digits after the point.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scale = num_traits::pow(BigInt::from(10u8), 30);
        let scaled = (&self.mantissa.abs() * &scale) >> FRAC_BITS;
        let (int, frac) = (&scaled / &scale, &scaled % &scale);
        let sign = if self.mantissa.sign() == Sign::Minus {
            "-"
        } else {
            ""
        };
        write!(f, "{sign}{int}.{frac:0>30}")
    }
}

/// How a [`FitResult`] was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitMethod {
    /// Exact interpolation of the last three terms.
    ThreeTerm,
    /// Least squares on `ln a_m` over a window of this many terms.
    LeastSquares { window: usize },
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitMethod::ThreeTerm => write!(f, "three-term"),
            FitMethod::LeastSquares { window } => write!(f, "least-squares(window={window})"),
        }
    }
}

/// Empirical estimates of `mu` and `theta` using terms up to `a_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub n: usize,
    pub mu: f64,
    pub theta: f64,
    pub method: FitMethod,
}

/// Formats with 10 significant digits.
pub fn format_sig10(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = 9 - x.abs().log10().floor() as i32;
    if digits >= 0 {
        format!("{:.*}", digits as usize, x)
    } else {
        format!("{:.9e}", x)
    }
}

/// Turns counts into [`Real`]s.
pub fn to_reals(a: &[BigUint]) -> Vec<Real> {
    a.iter().map(Real::from_biguint).collect()
}

fn term(a: &[Real], m: usize) -> Result<&Real> {
    let x = a
        .get(m.wrapping_sub(1))
        .ok_or_else(|| Error::invalid(format!("a_{m} is missing")))?;
    if !x.is_positive() {
        return Err(Error::invalid(format!("a_{m} must be positive")));
    }
    Ok(x)
}

/// `(mu, theta)` from `a_{n-2}, a_{n-1}, a_n`, where `a[m - 1] = a_m`.
///
/// With `r_m = a_m / a_{m-1}`, `theta = ln(r_n / r_{n-1}) / ln(n (n-2) / (n-1)^2)`
/// and `mu = r_n / (n / (n-1))^theta`.
pub fn fit_three_term(a: &[Real], n: usize) -> Result<FitResult> {
    if n < 3 {
        return Err(Error::invalid("the three-term fit needs n >= 3"));
    }
    let (a0, a1, a2) = (term(a, n - 2)?, term(a, n - 1)?, term(a, n)?);
    let r_prev = a1.div(a0)?;
    let r_last = a2.div(a1)?;
    let (theta, mu) = three_term_core(&r_prev, &r_last, n)?;
    Ok(FitResult {
        n,
        mu: mu.to_f64(),
        theta: theta.to_f64(),
        method: FitMethod::ThreeTerm,
    })
}

fn three_term_core(r_prev: &Real, r_last: &Real, n: usize) -> Result<(Real, Real)> {
    let n_i = n as i64;
    let num = r_last.div(r_prev)?.ln()?;
    let den = Real::from_int(n_i * (n_i - 2))
        .div(&Real::from_int((n_i - 1) * (n_i - 1)))?
        .ln()?;
    let theta = num.div(&den)?;
    let base = Real::from_int(n_i).div(&Real::from_int(n_i - 1))?;
    let mu = r_last.div(&base.powf(&theta)?)?;
    Ok((theta, mu))
}

/// Three-term fits at every `n` in `nmin..=nmax`.
pub fn fit_profile(a: &[Real], nmin: usize, nmax: usize) -> Result<Vec<FitResult>> {
    if nmin < 3 || nmax < nmin {
        return Err(Error::invalid(format!("bad fit range {nmin}..={nmax}")));
    }
    (nmin..=nmax).map(|n| fit_three_term(a, n)).collect()
}

/// Alternative fit: least squares of `ln a_m = c + m ln mu + theta ln m`
/// over `m = n - window + 1 ..= n`.
pub fn fit_least_squares(a: &[Real], n: usize, window: usize) -> Result<FitResult> {
    if window < 3 || window > n {
        return Err(Error::invalid(format!("window must lie in 3..={n}")));
    }
    let mut ata = vec![vec![Real::zero(); 3]; 3];
    let mut atb = vec![Real::zero(); 3];
    for m in n + 1 - window..=n {
        let y = term(a, m)?.ln()?;
        let row = [
            Real::one(),
            Real::from_int(m as i64),
            Real::from_int(m as i64).ln()?,
        ];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] = ata[i][j].add(&row[i].mul(&row[j]));
            }
            atb[i] = atb[i].add(&row[i].mul(&y));
        }
    }
    let x = solve3(ata, atb)?;
    Ok(FitResult {
        n,
        mu: x[1].exp().to_f64(),
        theta: x[2].to_f64(),
        method: FitMethod::LeastSquares { window },
    })
}

fn solve3(mut m: Vec<Vec<Real>>, mut b: Vec<Real>) -> Result<Vec<Real>> {
    let size = b.len();
    for col in 0..size {
        let pivot = (col..size)
            .max_by(|&x, &y| m[x][col].mantissa.abs().cmp(&m[y][col].mantissa.abs()))
            .expect("non-empty range");
        if m[pivot][col].mantissa.is_zero() {
            return Err(Error::invalid("singular least-squares system"));
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..size {
            let f = m[row][col].div(&m[col][col])?;
            let (upper, lower) = m.split_at_mut(row);
            for (dst, src) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *dst = dst.sub(&f.mul(src));
            }
            let t = f.mul(&b[col]);
            b[row] = b[row].sub(&t);
        }
    }
    let mut x = vec![Real::zero(); size];
    for row in (0..size).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..size {
            acc = acc.sub(&m[row][k].mul(&x[k]));
        }
        x[row] = acc.div(&m[row][row])?;
    }
    Ok(x)
}
