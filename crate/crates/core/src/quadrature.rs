//! Globally adaptive 21-point Gauss-Kronrod quadrature.
//!
//! Intervals are kept in a max-heap keyed on their error estimate; the worst
//! one is bisected until the summed error meets the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{QuadratureFailure, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Convergence controls for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel: 1e-8,
            abs: 0.0,
            max_intervals: 2000,
        }
    }
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self {
            rel,
            ..Self::default()
        }
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }

    fn target(&self, total: f64) -> f64 {
        self.abs.max(self.rel * total.abs())
    }
}

/// A converged integral together with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One application of the 21-point Kronrod rule with its embedded 10-point
/// Gauss rule. Error estimate follows the QUADPACK heuristic.
pub fn gauss_kronrod_21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    let res_k_scaled = res_k * half;
    res_abs *= h;
    res_asc *= h;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (res_k_scaled, err)
}

/// Integrate `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
    context: &str,
) -> Result<Integral> {
    integrate_with_breaks(f, &[a, b], tol, context)
}

/// Integrate `f` over `[points[0], points[last]]`, seeding the subdivision
/// with the given increasing break points.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    tol: Tolerance,
    context: &str,
) -> Result<Integral> {
    assert!(points.len() >= 2, "need at least one interval");
    let mut heap = BinaryHeap::with_capacity(tol.max_intervals.max(points.len()));
    let mut applications = 0usize;
    for w in points.windows(2) {
        applications += 1;
        let (value, error) = gauss_kronrod_21(&mut f, w[0], w[1]);
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    let fail = |heap: &BinaryHeap<Segment>, applications: usize, reason: &str| {
        let (v, e) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        QuadratureFailure {
            context: context.to_string(),
            estimate: v,
            error_estimate: e,
            intervals: heap.len(),
            evaluations: 21 * applications,
            reason: reason.to_string(),
        }
    };

    loop {
        let (total, err) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        if !total.is_finite() || !err.is_finite() {
            return Err(fail(&heap, applications, "integrand produced a non-finite value").into());
        }
        if err <= tol.target(total) {
            return Ok(Integral {
                value: total,
                error: err,
                intervals: heap.len(),
                evaluations: 21 * applications,
            });
        }
        if heap.len() >= tol.max_intervals {
            return Err(fail(&heap, applications, "interval budget exhausted").into());
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            return Err(fail(&heap, applications, "interval too narrow to bisect").into());
        }
        applications += 2;
        let (v1, e1) = gauss_kronrod_21(&mut f, worst.a, mid);
        let (v2, e2) = gauss_kronrod_21(&mut f, mid, worst.b);
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
}
