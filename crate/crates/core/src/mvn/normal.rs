//! Univariate and bivariate standard normal primitives.

use crate::error::{Error, Result};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Inverse of the standard normal CDF (Wichura's AS 241, PPND16).
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile requires p in (0,1), got {p}")));
    }
    Ok(quantile_unchecked(p))
}

pub(crate) fn quantile_unchecked(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
                + 67265.770_927_008_7)
                * r
                + 45921.953_931_549_87)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545 * r + 28729.085_735_721_943) * r
                + 39307.895_800_092_71)
                * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

// Gauss-Legendre half-rules (abscissae on (0,1], weights) for 6, 12 and 20 points.
const GL6_W: [f64; 3] = [0.171_324_492_379_170_5, 0.360_761_573_048_138_4, 0.467_913_934_572_690_4];
const GL6_X: [f64; 3] = [0.932_469_514_203_152_2, 0.661_209_386_466_264_7, 0.238_619_186_083_197];
const GL12_W: [f64; 6] = [
    0.047_175_336_386_511_77,
    0.106_939_325_995_318_3,
    0.160_078_328_543_346_4,
    0.203_167_426_723_065_9,
    0.233_492_536_538_354_7,
    0.249_147_045_813_402_9,
];
const GL12_X: [f64; 6] = [
    0.981_560_634_246_719_1,
    0.904_117_256_370_475,
    0.769_902_674_194_305,
    0.587_317_954_286_617_1,
    0.367_831_498_998_180_2,
    0.125_233_408_511_469_2,
];
const GL20_W: [f64; 10] = [
    0.017_614_007_139_152_12,
    0.040_601_429_800_386_94,
    0.062_672_048_334_109_06,
    0.083_276_741_576_704_75,
    0.101_930_119_817_240_4,
    0.118_194_531_961_518_4,
    0.131_688_638_449_176_6,
    0.142_096_109_318_382_1,
    0.149_172_986_472_603_7,
    0.152_753_387_130_725_9,
];
const GL20_X: [f64; 10] = [
    0.993_128_599_185_094_9,
    0.963_971_927_277_913_8,
    0.912_234_428_251_325_9,
    0.839_116_971_822_218_8,
    0.746_331_906_460_150_8,
    0.636_053_680_726_515,
    0.510_867_001_950_827_1,
    0.373_706_088_715_419_6,
    0.227_785_851_141_645_1,
    0.076_526_521_133_497_33,
];

/// Bivariate normal probabilities at one fixed correlation, with the
/// quadrature nodes of the moderate-correlation branch precomputed.
#[derive(Debug, Clone)]
pub struct BvnKernel {
    r: f64,
    scale: f64,
    /// `(weight, sin, 1 / (1 - sin^2))` per node.
    nodes: [(f64, f64, f64); 20],
    n: usize,
}

impl BvnKernel {
    pub fn new(r: f64) -> Self {
        let mut nodes = [(0.0, 0.0, 0.0); 20];
        let mut n = 0;
        let mut scale = 0.0;
        if r != 0.0 && r.abs() < 0.925 {
            let (w, x): (&[f64], &[f64]) = if r.abs() < 0.3 {
                (&GL6_W, &GL6_X)
            } else if r.abs() < 0.75 {
                (&GL12_W, &GL12_X)
            } else {
                (&GL20_W, &GL20_X)
            };
            let asr = r.asin();
            for (&wi, &xi) in w.iter().zip(x) {
                for sign in [-1.0, 1.0] {
                    let sn = (asr * (sign * xi + 1.0) / 2.0).sin();
                    nodes[n] = (wi, sn, 1.0 / (1.0 - sn * sn));
                    n += 1;
                }
            }
            scale = asr / (4.0 * PI);
        }
        Self { r, scale, nodes, n }
    }

    /// `P(X > h, Y > k)`.
    pub fn upper(&self, h: f64, k: f64) -> f64 {
        if h == f64::INFINITY || k == f64::INFINITY {
            return 0.0;
        }
        if h == f64::NEG_INFINITY {
            return if k == f64::NEG_INFINITY {
                1.0
            } else {
                std_normal_cdf(-k)
            };
        }
        if k == f64::NEG_INFINITY {
            return std_normal_cdf(-h);
        }
        if self.r == 0.0 {
            return std_normal_cdf(-h) * std_normal_cdf(-k);
        }
        if self.n == 0 {
            return bvn_upper_high(h, k, self.r);
        }
        let hk = h * k;
        let hs = (h * h + k * k) / 2.0;
        let mut bvn = 0.0;
        for &(wi, sn, inv) in &self.nodes[..self.n] {
            bvn += wi * ((sn * hk - hs) * inv).exp();
        }
        (bvn * self.scale + std_normal_cdf(-h) * std_normal_cdf(-k)).clamp(0.0, 1.0)
    }

    /// `P(X <= a, Y <= b)`.
    pub fn cdf(&self, a: f64, b: f64) -> f64 {
        self.upper(-a, -b)
    }
}

/// Upper bivariate orthant `P(X > h, Y > k)` for standard normals with
/// correlation `r` (Drezner-Wesolowsky with Genz's refinements).
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    BvnKernel::new(r).upper(h, k)
}

/// Branch for `|r| >= 0.925` with finite `h`, `k`.
fn bvn_upper_high(h: f64, k: f64, r: f64) -> f64 {
    let (w, x): (&[f64], &[f64]) = (&GL20_W, &GL20_X);
    let two_pi = 2.0 * PI;
    let mut hk = h * k;
    let mut bvn = 0.0;
    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = as_.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(bs / as_ + hk) / 2.0).exp()
            * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp()
                * two_pi.sqrt()
                * std_normal_cdf(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (&wi, &xi) in w.iter().zip(x) {
            for sign in [-1.0, 1.0] {
                let xs = (a * (sign * xi + 1.0)).powi(2);
                let asr = -(bs / xs + hk) / 2.0;
                if asr > -100.0 {
                    let rs = (1.0 - xs).sqrt();
                    bvn += a
                        * wi
                        * asr.exp()
                        * ((-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))).exp() / rs
                            - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / two_pi;
    }
    if r > 0.0 {
        bvn += std_normal_cdf(-h.max(k));
    } else {
        bvn = -bvn;
        if k > h {
            bvn += std_normal_cdf(k) - std_normal_cdf(h);
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// Bivariate standard normal CDF `P(X <= a, Y <= b)` with correlation `r`.
pub fn bvn_cdf(a: f64, b: f64, r: f64) -> f64 {
    bvn_upper(-a, -b, r)
}

/// `P(a1 < X <= b1, a2 < Y <= b2)` for standard normals with correlation `r`.
pub fn bvn_rect(a1: f64, b1: f64, a2: f64, b2: f64, r: f64) -> f64 {
    if a1 >= b1 || a2 >= b2 {
        return 0.0;
    }
    // Reflect intervals lying mostly in the upper tail so that the corner
    // terms stay small and cancellation is avoided.
    let (mut a1, mut b1, mut a2, mut b2, mut r) = (a1, b1, a2, b2, r);
    if a1 + b1 > 0.0 {
        (a1, b1, r) = (-b1, -a1, -r);
    }
    if a2 + b2 > 0.0 {
        (a2, b2, r) = (-b2, -a2, -r);
    }
    let kern = BvnKernel::new(r);
    let mut p = kern.cdf(b1, b2);
    if a1 > f64::NEG_INFINITY {
        p -= kern.cdf(a1, b2);
    }
    if a2 > f64::NEG_INFINITY {
        p -= kern.cdf(b1, a2);
    }
    if a1 > f64::NEG_INFINITY && a2 > f64::NEG_INFINITY {
        p += kern.cdf(a1, a2);
    }
    p.clamp(0.0, 1.0)
}

/// `P(a < X <= b)` for a standard normal.
pub fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    // Evaluate in the tail where the CDF is accurate.
    if a > 0.0 {
        (std_normal_cdf(-a) - std_normal_cdf(-b)).max(0.0)
    } else {
        (std_normal_cdf(b) - std_normal_cdf(a)).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Gauss-Legendre oracle for the bivariate CDF, integrating
    /// phi(x) * Phi((b - r x) / sqrt(1 - r^2)) over (-9, a).
    fn bvn_quadrature(a: f64, b: f64, r: f64) -> f64 {
        let lo = -9.0;
        let hi = a.min(9.0);
        if hi <= lo {
            return 0.0;
        }
        let panels = 400;
        let width = (hi - lo) / panels as f64;
        let s = (1.0 - r * r).sqrt();
        let mut total = 0.0;
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * width;
            for (&w, &x) in GL20_W.iter().zip(&GL20_X) {
                for sign in [-1.0, 1.0] {
                    let t = mid + sign * x * width / 2.0;
                    total += w * width / 2.0 * std_normal_pdf(t) * std_normal_cdf((b - r * t) / s);
                }
            }
        }
        total
    }

    #[test]
    fn cdf_symmetry_points() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn cdf_at_1_96() {
        // erfc series value of Phi(1.96) = 0.97500210485177952...
        assert!((std_normal_cdf(1.96) - 0.975_002_104_851_779_5).abs() < 1e-14);
    }

    #[test]
    fn quantile_round_trip() {
        let mut p = 1e-10;
        while p < 1.0 - 1e-10 {
            let x = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(x) - p).abs() < 1e-12, "p={p}");
            p = if p < 0.01 { p * 3.0 } else { p + 0.0137 };
        }
        for p in [1e-10, 1.0 - 1e-10, 0.025, 0.975] {
            let x = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(x) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn quantile_domain() {
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn orthant_closed_form() {
        for r in [-0.99, -0.9, -0.5, -0.1, 0.0, 0.2, 0.5, 0.8, 0.93, 0.999] {
            let expected = 0.25 + f64::asin(r) / (2.0 * PI);
            assert!((bvn_cdf(0.0, 0.0, r) - expected).abs() < 1e-14, "r={r}");
        }
    }

    #[test]
    fn matches_quadrature_oracle() {
        let cases = [
            (0.3, -0.4, 0.1),
            (1.2, 0.5, 0.5),
            (-1.0, 2.0, -0.7),
            (0.0, 1.5, 0.95),
            (-2.0, -1.5, -0.95),
            (2.5, -0.5, 0.6),
            (-0.3, -0.3, 0.999),
        ];
        for (a, b, r) in cases {
            let got = bvn_cdf(a, b, r);
            let want = bvn_quadrature(a, b, r);
            assert!((got - want).abs() < 1e-10, "({a},{b},{r}): {got} vs {want}");
        }
    }

    #[test]
    fn rectangle_independent_product() {
        let p = bvn_rect(-1.0, 1.0, -1.0, 1.0, 0.0);
        let one = std_normal_cdf(1.0) - std_normal_cdf(-1.0);
        assert!((p - one * one).abs() < 1e-14);
        assert!((p - 0.466_064_9).abs() < 1e-7);
    }

    #[test]
    fn rectangle_infinite_bounds() {
        let inf = f64::INFINITY;
        assert_eq!(bvn_rect(-inf, inf, -inf, inf, 0.4), 1.0);
        assert_eq!(bvn_rect(0.5, 0.5, -inf, inf, 0.4), 0.0);
        let p = bvn_rect(-inf, 0.3, -inf, inf, 0.4);
        assert!((p - std_normal_cdf(0.3)).abs() < 1e-15);
    }
}
