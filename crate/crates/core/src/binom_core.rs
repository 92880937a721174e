#![allow(clippy::excessive_precision)]

//! Binomial probability kernels and the standard-normal upper-tail quantile.
//!
//! Single pmf terms use the saddle-point form of the log-gamma ratio
//! (Stirling-series error terms plus a deviance `bd0`), which keeps the
//! relative error of every term near machine precision independently of `k`.
//! Range probabilities add those terms in descending magnitude with
//! Neumaier compensation.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Number of Bernoulli trials, always at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrialCount(u64);

impl TrialCount {
    pub fn new(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("number of trials must be at least 1".into()));
        }
        Ok(Self(n))
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }
}

/// A real number in `[0, 1]`. Construction rejects NaN and out-of-range values.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Domain(format!(
                "probability must lie in [0, 1], got {value}"
            )));
        }
        Ok(Self(value))
    }

    /// Like [`Probability::new`] but additionally rejects the endpoints.
    pub fn interior(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::Domain(format!("p must lie in (0, 1), got {value}")));
        }
        Ok(Self(value))
    }

    /// Clamps a computed probability that may carry rounding excursions.
    pub(crate) fn saturating(value: f64) -> Self {
        debug_assert!(!value.is_nan());
        Self(value.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

// ln(k!) - [(k + 1/2) ln k - k + ln sqrt(2 pi)], exact to double precision.
const STIRLING_ERROR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_22,
    0.041_340_695_955_409_294_094,
    0.027_677_925_684_998_339_149,
    0.020_790_672_103_765_093_112,
    0.016_644_691_189_821_192_163,
    0.013_876_128_823_070_747_999,
    0.011_896_709_945_891_770_095,
    0.010_411_265_261_972_096_497,
    0.009_255_462_182_712_732_917_7,
    0.008_330_563_433_362_871_256_5,
    0.007_573_675_487_951_840_795,
    0.006_942_840_107_209_529_865_7,
    0.006_408_994_188_004_207_068_4,
    0.005_951_370_112_758_847_735_6,
    0.005_554_733_551_962_801_371,
];

fn stirling_error(k: u64) -> f64 {
    if k < STIRLING_ERROR_TABLE.len() as u64 {
        return STIRLING_ERROR_TABLE[k as usize];
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let x = k as f64;
    let xx = x * x;
    (S0 - (S1 - (S2 - (S3 - S4 / xx) / xx) / xx) / xx) / x
}

/// Deviance term `x ln(x / m) + m - x`, accurate when `x` is close to `m`.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return next;
            }
            s = next;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// Natural log of the binomial pmf with `q = 1 - p` supplied by the caller.
/// `k` must already be in `0..=n`.
fn log_pmf_raw(n: u64, k: u64, p: f64, q: f64, stirling_n: f64) -> f64 {
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if k == 0 {
        return if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
    }
    if k == n {
        return if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
    }
    let kf = k as f64;
    let rest = (n - k) as f64;
    let lc = stirling_n
        - stirling_error(k)
        - stirling_error(n - k)
        - bd0(kf, nf * p)
        - bd0(rest, nf * q);
    let lf = (2.0 * PI).ln() + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

/// `ln[C(n, k) p^k (1 - p)^(n - k)]`, with exact degenerate conventions at
/// `p = 0` and `p = 1` (`ln 1 = 0` on the support point, `-inf` elsewhere).
pub fn log_binom_pmf(n: TrialCount, k: i64, p: Probability) -> Result<f64> {
    let n = n.get();
    if k < 0 || k as u64 > n {
        return Err(Error::Domain(format!("count k = {k} outside 0..={n}")));
    }
    let p = p.get();
    Ok(log_pmf_raw(n, k as u64, p, 1.0 - p, stirling_error(n)))
}

/// `Pr{a <= K <= b}` for `K ~ Binomial(n, p)`. The range is clamped to
/// `0..=n`; an empty range gives exactly zero.
pub fn binom_range_prob(n: TrialCount, a: i64, b: i64, p: Probability) -> Probability {
    let n = n.get();
    let lo = a.max(0);
    let hi = b.min(n as i64);
    if lo > hi {
        return Probability::ZERO;
    }
    let (lo, hi) = (lo as u64, hi as u64);
    let p = p.get();
    let q = 1.0 - p;
    if lo == 0 && hi == n {
        return Probability::ONE;
    }
    let stirling_n = stirling_error(n);
    let mut terms: Vec<f64> = (lo..=hi)
        .map(|k| log_pmf_raw(n, k, p, q, stirling_n).exp())
        .collect();
    terms.sort_unstable_by(|x, y| y.total_cmp(x));
    Probability::saturating(neumaier_sum(&terms))
}

pub(crate) fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Standard-normal upper-tail probability `Pr{Z > z}`.
pub fn normal_upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

fn poly(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

// Wichura, Algorithm AS 241 (PPND16).
const CENTRAL_NUM: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const CENTRAL_DEN: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const NEAR_NUM: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const NEAR_DEN: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const FAR_NUM: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const FAR_DEN: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

/// Critical value `z` with `Pr{Z > z} = half_delta` for a standard normal `Z`.
///
/// Rational approximation followed by one Newton step on the erfc-based tail.
pub fn upper_tail_quantile(half_delta: f64) -> Result<f64> {
    if !(half_delta > 0.0 && half_delta < 0.5) {
        return Err(Error::Domain(format!(
            "upper-tail mass must lie in (0, 0.5), got {half_delta}"
        )));
    }
    let q = 0.5 - half_delta;
    let z = if q <= 0.425 {
        let r = 0.180_625 - q * q;
        q * poly(&CENTRAL_NUM, r) / poly(&CENTRAL_DEN, r)
    } else {
        let r = (-half_delta.ln()).sqrt();
        if r <= 5.0 {
            let r = r - 1.6;
            poly(&NEAR_NUM, r) / poly(&NEAR_DEN, r)
        } else {
            let r = r - 5.0;
            poly(&FAR_NUM, r) / poly(&FAR_DEN, r)
        }
    };
    let density = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    Ok(z + (normal_upper_tail(z) - half_delta) / density)
}
