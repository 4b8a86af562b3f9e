// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::detect::SpikeEvent;
use super::laws::{expected_count, RectDomain};
use super::stats::{
    chi_square_sf, correlation, ks_p_value, normal_two_sided_p, poisson_two_sided_p, wilson, Proportion,
};
use crate::error::{invalid, Error, Result};

/// Minimum number of qualifying events for [`max_law_test`].
pub const MIN_MAX_LAW_EVENTS: usize = 50;

fn single_label(events: &[SpikeEvent]) -> Result<()> {
    if let Some(first) = events.first() {
        if events.iter().any(|e| e.plateau != first.plateau) {
            return Err(invalid("events must come from a single plateau label"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainRecord {
    pub domain: RectDomain,
    pub observed: u64,
    pub mu: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Lag-one correlation of counts in consecutive equal time windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceCheck {
    pub windows: usize,
    pub counts: Vec<u64>,
    pub correlation: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonReport {
    pub prefactor: f64,
    pub records: Vec<DomainRecord>,
    /// Present when every domain has `mu >= 5`.
    pub chi_square: Option<ChiSquare>,
    pub independence: Option<IndependenceCheck>,
}

impl PoissonReport {
    pub fn min_p_value(&self) -> f64 {
        self.records.iter().map(|r| r.p_value).fold(1.0, f64::min)
    }
}

/// Number of windows used by the independence check.
pub const INDEPENDENCE_WINDOWS: usize = 20;

/// Observed against predicted counts in disjoint domains.
pub fn poisson_test(events: &[SpikeEvent], domains: &[RectDomain], prefactor: f64) -> Result<PoissonReport> {
    single_label(events)?;
    for (i, a) in domains.iter().enumerate() {
        a.validate()?;
        if domains[i + 1..].iter().any(|b| a.overlaps(b)) {
            return Err(invalid("domains overlap"));
        }
    }
    let records: Vec<DomainRecord> = domains
        .iter()
        .map(|d| {
            let observed = d.count(events);
            let mu = expected_count(d, prefactor);
            DomainRecord { domain: *d, observed, mu, p_value: poisson_two_sided_p(observed, mu) }
        })
        .collect();
    let chi_square = (!records.is_empty() && records.iter().all(|r| r.mu >= 5.0)).then(|| {
        let statistic = records.iter().map(|r| (r.observed as f64 - r.mu).powi(2) / r.mu).sum();
        let dof = records.len();
        ChiSquare { statistic, dof, p_value: chi_square_sf(statistic, dof as f64) }
    });
    Ok(PoissonReport { prefactor, records, chi_square, independence: independence_check(events, domains) })
}

fn independence_check(events: &[SpikeEvent], domains: &[RectDomain]) -> Option<IndependenceCheck> {
    let t_lo = domains.iter().map(|d| d.t_lo).fold(f64::INFINITY, f64::min);
    let t_hi = domains.iter().map(|d| d.t_hi).fold(f64::NEG_INFINITY, f64::max);
    let q_lo = domains.iter().map(|d| d.q_lo).fold(f64::INFINITY, f64::min);
    let q_hi = domains.iter().map(|d| d.q_hi).fold(f64::NEG_INFINITY, f64::max);
    if !(t_hi > t_lo) {
        return None;
    }
    let n = INDEPENDENCE_WINDOWS;
    let width = (t_hi - t_lo) / n as f64;
    let mut counts = vec![0u64; n];
    for e in events.iter().filter(|e| !e.complete && e.t_max >= t_lo && e.t_max < t_hi) {
        if e.height >= q_lo && e.height < q_hi {
            let k = (((e.t_max - t_lo) / width) as usize).min(n - 1);
            counts[k] += 1;
        }
    }
    let c: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let r = correlation(&c[..n - 1], &c[1..]);
    let z = r * ((n - 1) as f64).sqrt();
    Some(IndependenceCheck { windows: n, counts, correlation: r, p_value: normal_two_sided_p(z) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub level: f64,
    pub observed: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxLawReport {
    pub q0: f64,
    pub n: usize,
    /// Complete events, counted at height 1.
    pub n_complete: usize,
    pub ks_statistic: f64,
    pub p_value: f64,
    pub survival: Vec<SurvivalPoint>,
}

/// KS test of event heights against `F(Q) = 1 - q0/Q` on `[q0, 1)`, with
/// complete events as the atom of mass `q0` at 1.
pub fn max_law_test(events: &[SpikeEvent], q0: f64) -> Result<MaxLawReport> {
    if !(q0 > 0.0 && q0 < 1.0) {
        return Err(invalid(format!("q0 must lie in (0, 1), got {q0}")));
    }
    let mut heights: Vec<f64> = events.iter().filter(|e| !e.complete && e.height >= q0).map(|e| e.height).collect();
    let n_complete = events.iter().filter(|e| e.complete).count();
    let n = heights.len() + n_complete;
    if n < MIN_MAX_LAW_EVENTS {
        return Err(Error::InsufficientData(format!("{n} events with height >= {q0}, need {MIN_MAX_LAW_EVENTS}")));
    }
    heights.sort_by(f64::total_cmp);
    if n_complete == 0 && heights.first() == heights.last() {
        return Err(Error::InsufficientData("all heights are equal".into()));
    }
    let cdf = |x: f64| 1.0 - q0 / x;
    let nf = n as f64;
    let mut d = heights
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / nf - cdf(x)).abs().max((cdf(x) - i as f64 / nf).abs()))
        .fold(0.0, f64::max);
    d = d.max((heights.len() as f64 / nf - (1.0 - q0)).abs());
    let survival = (0..5)
        .map(|k| {
            let level = q0 * (1.0 / q0).powf(k as f64 / 5.0);
            let above = heights.iter().filter(|&&h| h >= level).count() + n_complete;
            SurvivalPoint { level, observed: above as f64 / nf, predicted: q0 / level }
        })
        .collect();
    Ok(MaxLawReport { q0, n, n_complete, ks_statistic: d, p_value: ks_p_value(n, d), survival })
}

/// Watches `|Q - R|` on `]t1, t2[` for one trajectory.
///
/// Monitoring starts once the filter has first caught up with the flip at
/// `t1`, i.e. `|Q - R|` has dropped below `settle_tol`.
#[derive(Debug, Clone, Copy)]
pub struct WrongPredictionMonitor {
    t1: f64,
    t2: f64,
    settle_tol: f64,
    settled: bool,
    sup: f64,
}

impl WrongPredictionMonitor {
    pub fn new(t1: f64, t2: f64, settle_tol: f64) -> Result<Self> {
        if !(t1 < t2) {
            return Err(invalid("need t1 < t2"));
        }
        Ok(Self { t1, t2, settle_tol, settled: false, sup: 0.0 })
    }

    #[inline]
    pub fn push(&mut self, t: f64, q: f64, r: u8) {
        if t <= self.t1 || t >= self.t2 {
            return;
        }
        let d = (q - r as f64).abs();
        if !self.settled {
            self.settled = d < self.settle_tol;
            return;
        }
        self.sup = self.sup.max(d);
    }

    pub fn settled(&self) -> bool {
        self.settled
    }

    /// `sup |Q - R| > 1/2` after settling, or never settled.
    pub fn wrong(&self) -> bool {
        !self.settled || self.sup > 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrongPredictionReport {
    pub proportion: Proportion,
    /// Trajectories where the filter never caught up; counted as wrong.
    pub unsettled: u64,
}

/// Fraction of monitored intervals with a wrong prediction.
pub fn wrong_prediction_probability(monitors: &[WrongPredictionMonitor]) -> Result<WrongPredictionReport> {
    let wrong = monitors.iter().filter(|m| m.wrong()).count() as u64;
    let unsettled = monitors.iter().filter(|m| !m.settled()).count() as u64;
    Ok(WrongPredictionReport { proportion: wilson(wrong, monitors.len() as u64)?, unsettled })
}

/// Probability of at least one wrong prediction on an interval of length
/// `duration` for a Poisson spike law with the given prefactor.
pub fn predicted_wrong_probability(prefactor: f64, duration: f64) -> f64 {
    let mu = expected_count(&RectDomain { t_lo: 0.0, t_hi: duration, q_lo: 0.5, q_hi: 1.0 }, prefactor);
    1.0 - (-mu).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub domain: RectDomain,
    pub scaled: RectDomain,
    pub count: u64,
    pub scaled_count: u64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares counts in `D` and `A D`; `window_end` is the end of the observed
/// time range.
pub fn scale_invariance_test(
    events: &[SpikeEvent],
    domain: &RectDomain,
    a: f64,
    window_end: f64,
) -> Result<ScaleReport> {
    single_label(events)?;
    let scaled = domain.scaled(a)?;
    if scaled.t_hi > window_end || domain.t_hi > window_end {
        return Err(invalid(format!("scaled domain ends at {} beyond the window end {window_end}", scaled.t_hi)));
    }
    let count = domain.count(events);
    let scaled_count = scaled.count(events);
    let mu_hat = (count + scaled_count) as f64 / 2.0;
    let tolerance = 3.0 * (2.0 * mu_hat).sqrt();
    let pass = (count as f64 - scaled_count as f64).abs() <= tolerance;
    Ok(ScaleReport { domain: *domain, scaled, count, scaled_count, tolerance, pass })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikelessReport {
    pub level: f64,
    pub filtered_count: u64,
    pub smoothed_count: u64,
    /// `smoothed / filtered`; absent when the filtered estimate has no excursions.
    pub ratio: Option<f64>,
}

/// Excursions of `|estimate - R|` above `level` inside constant-`R` stretches.
/// An excursion counts if it starts after the estimate has first come within
/// `level` of `R` in that stretch and ends before the stretch does.
pub fn count_excursions(estimate: &[f64], r: &[u8], level: f64) -> Result<u64> {
    if estimate.len() != r.len() {
        return Err(invalid("estimate and R paths differ in length"));
    }
    let mut count = 0;
    let mut i = 0;
    while i < r.len() {
        let mut j = i;
        while j < r.len() && r[j] == r[i] {
            j += 1;
        }
        let (mut settled, mut above) = (false, false);
        for k in i..j {
            let d = (estimate[k] - r[k] as f64).abs();
            if !settled {
                settled = d <= level;
            } else if !above && d > level {
                above = true;
            } else if above && d <= level {
                above = false;
                count += 1;
            }
        }
        i = j;
    }
    Ok(count)
}

pub fn spikelessness_comparison(filtered: &[f64], smoothed: &[f64], r: &[u8], level: f64) -> Result<SpikelessReport> {
    if filtered.len() != smoothed.len() {
        return Err(invalid("filtered and smoothed paths differ in length"));
    }
    let filtered_count = count_excursions(filtered, r, level)?;
    let smoothed_count = count_excursions(smoothed, r, level)?;
    let ratio = (filtered_count > 0).then(|| smoothed_count as f64 / filtered_count as f64);
    Ok(SpikelessReport { level, filtered_count, smoothed_count, ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRecord {
    pub q_lo: f64,
    pub q_hi: f64,
    pub observed: u64,
    pub expected: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub total: u64,
    pub bands: Vec<BandRecord>,
    pub pass: bool,
}

/// Prefactor-free test: counts in height bands proportional to
/// `1/Q_lo - 1/Q_hi`, each within `3 sqrt(expected)`.
pub fn band_shape_test(events: &[SpikeEvent], bands: &[(f64, f64)]) -> Result<ShapeReport> {
    if bands.is_empty() {
        return Err(invalid("no bands"));
    }
    let doms: Vec<RectDomain> =
        bands.iter().map(|&(lo, hi)| RectDomain::new(-1e300, 1e300, lo, hi)).collect::<Result<_>>()?;
    for (i, a) in doms.iter().enumerate() {
        if doms[i + 1..].iter().any(|b| a.overlaps(b)) {
            return Err(invalid("bands overlap"));
        }
    }
    let counts: Vec<u64> = doms.iter().map(|d| d.count(events)).collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InsufficientData("no events in the bands".into()));
    }
    let weights: Vec<f64> = bands.iter().map(|&(lo, hi)| 1.0 / lo - 1.0 / hi).collect();
    let wsum: f64 = weights.iter().sum();
    let records: Vec<BandRecord> = bands
        .iter()
        .zip(&counts)
        .zip(&weights)
        .map(|((&(q_lo, q_hi), &observed), &w)| {
            let expected = total as f64 * w / wsum;
            let pass = (observed as f64 - expected).abs() <= 3.0 * expected.sqrt();
            BandRecord { q_lo, q_hi, observed, expected, pass }
        })
        .collect();
    Ok(ShapeReport { total, pass: records.iter().all(|r| r.pass), bands: records })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefactorFit {
    pub count: u64,
    pub plateau_time: f64,
    pub q_lo: f64,
    pub prefactor: f64,
    pub std_error: f64,
}

/// Prefactor from the number of spikes with height in `[q_lo, 1)` over the
/// given plateau time.
pub fn fit_prefactor(events: &[SpikeEvent], plateau_time: f64, q_lo: f64) -> Result<PrefactorFit> {
    if !(plateau_time > 0.0) {
        return Err(Error::InsufficientData("no plateau time".into()));
    }
    let dom = RectDomain::new(-1e300, 1e300, q_lo, 1.0)?;
    let count = dom.count(events);
    let norm = plateau_time * (1.0 / q_lo - 1.0);
    Ok(PrefactorFit {
        count,
        plateau_time,
        q_lo,
        prefactor: count as f64 / norm,
        std_error: (count as f64).sqrt() / norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand_distr::{Distribution, Poisson as PoissonDist};

    fn spike(t: f64, h: f64) -> SpikeEvent {
        SpikeEvent { plateau: 0, t_start: t, t_max: t, t_end: t, height: h, complete: false, plateau_clock: t }
    }

    #[test]
    fn empty_domains_have_unit_p() {
        let d = RectDomain::new(0.0, 0.0, 0.1, 0.2).unwrap();
        let r = poisson_test(&[], &[d, RectDomain::new(1.0, 1.0, 0.1, 0.2).unwrap()], 1.0).unwrap();
        assert!(r.records.iter().all(|r| r.p_value == 1.0));
    }

    #[test]
    fn overlapping_domains_rejected() {
        let a = RectDomain::new(0.0, 2.0, 0.1, 0.3).unwrap();
        let b = RectDomain::new(1.0, 3.0, 0.2, 0.4).unwrap();
        assert!(poisson_test(&[], &[a, b], 1.0).is_err());
    }

    #[test]
    fn mixed_labels_rejected() {
        let mut e = spike(0.5, 0.2);
        e.plateau = 1;
        let d = RectDomain::new(0.0, 1.0, 0.1, 0.3).unwrap();
        assert!(poisson_test(&[spike(0.1, 0.2), e], &[d], 1.0).is_err());
    }

    #[test]
    fn degenerate_heights_are_insufficient() {
        let ev: Vec<_> = (0..100).map(|i| spike(i as f64, 0.1)).collect();
        assert!(matches!(max_law_test(&ev, 0.1), Err(Error::InsufficientData(_))));
        assert!(matches!(max_law_test(&ev[..10], 0.1), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn max_law_accepts_inverse_cdf_samples() {
        let mut passes = 0;
        for rep in 0..100 {
            let mut s = RngStream::new(900, rep);
            let ev: Vec<_> = (0..400)
                .map(|i| {
                    let q = 0.1 / (1.0 - s.uniform());
                    let mut e = spike(i as f64, q.min(1.0));
                    e.complete = q >= 1.0;
                    e
                })
                .collect();
            if max_law_test(&ev, 0.1).unwrap().p_value > 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 98, "{passes}");
    }

    #[test]
    fn max_law_rejects_uniform_heights() {
        let mut s = RngStream::new(901, 0);
        let ev: Vec<_> = (0..400).map(|i| spike(i as f64, 0.1 + 0.8 * s.uniform())).collect();
        assert!(max_law_test(&ev, 0.1).unwrap().p_value < 1e-6);
    }

    #[test]
    fn monitor_ignores_catch_up_and_endpoints() {
        let mut m = WrongPredictionMonitor::new(1.0, 2.0, 1e-3).unwrap();
        m.push(1.0, 0.0, 1);
        m.push(1.1, 0.2, 1);
        m.push(1.2, 0.9999, 1);
        m.push(1.5, 0.6, 1);
        m.push(2.0, 0.0, 1);
        assert!(!m.wrong());
        m.push(1.9, 0.4, 1);
        assert!(m.wrong());
    }

    #[test]
    fn predicted_wrong_probability_values() {
        let ln2 = std::f64::consts::LN_2;
        assert!((predicted_wrong_probability(1.0, ln2) - 0.5).abs() < 1e-12);
        assert!((predicted_wrong_probability(1.0, 2.0 * ln2) - 0.75).abs() < 1e-12);
        assert_eq!(predicted_wrong_probability(1.0, 0.0), 0.0);
    }

    #[test]
    fn unit_scale_is_identity() {
        let ev = vec![spike(1.0, 0.15), spike(2.0, 0.3)];
        let d = RectDomain::new(0.0, 10.0, 0.1, 0.2).unwrap();
        let r = scale_invariance_test(&ev, &d, 1.0, 10.0).unwrap();
        assert_eq!(r.count, r.scaled_count);
        assert!(scale_invariance_test(&ev, &d, 2.0, 15.0).is_err());
        assert!(scale_invariance_test(&ev, &RectDomain::new(0.0, 1.0, 0.4, 0.8).unwrap(), 2.0, 15.0).is_err());
    }

    #[test]
    fn spikeless_ratios() {
        let r: Vec<u8> = [vec![0u8; 50], vec![1u8; 50]].concat();
        let mut f: Vec<f64> = r.iter().map(|&x| x as f64).collect();
        f[10] = 0.7;
        f[60] = 0.2;
        let exact: Vec<f64> = r.iter().map(|&x| x as f64).collect();
        let rep = spikelessness_comparison(&f, &exact, &r, 0.5).unwrap();
        assert_eq!((rep.filtered_count, rep.smoothed_count, rep.ratio), (2, 0, Some(0.0)));
        let rep = spikelessness_comparison(&f, &f, &r, 0.5).unwrap();
        assert_eq!(rep.ratio, Some(1.0));
    }

    #[test]
    fn shape_of_exact_counts_passes() {
        let mut ev = Vec::new();
        for (n, h) in [(500, 0.15), (250, 0.3), (125, 0.6)] {
            ev.extend((0..n).map(|i| spike(i as f64, h)));
        }
        let bands = [(0.1, 0.2), (0.2, 0.4), (0.4, 0.8)];
        let r = band_shape_test(&ev, &bands).unwrap();
        assert!(r.pass);
        ev.extend((0..200).map(|i| spike(i as f64, 0.6)));
        assert!(!band_shape_test(&ev, &bands).unwrap().pass);
    }

    #[test]
    fn poisson_p_values_uniform_under_null() {
        let domains = [
            RectDomain::new(0.0, 10.0, 0.1, 0.2).unwrap(),
            RectDomain::new(0.0, 10.0, 0.2, 0.4).unwrap(),
            RectDomain::new(10.0, 20.0, 0.1, 0.4).unwrap(),
        ];
        let prefactor = 0.8;
        let mut ps = Vec::new();
        for rep in 0..200 {
            let mut s = RngStream::new(77, rep);
            let mut ev = Vec::new();
            for d in &domains {
                let mu = expected_count(d, prefactor);
                let n: f64 = PoissonDist::new(mu).unwrap().sample(&mut s);
                for _ in 0..n as u64 {
                    let t = d.t_lo + s.uniform() * d.duration();
                    let h = d.q_lo + s.uniform() * (d.q_hi - d.q_lo);
                    ev.push(spike(t, h));
                }
            }
            let report = poisson_test(&ev, &domains, prefactor).unwrap();
            ps.push(report.chi_square.unwrap().p_value);
        }
        let d = super::super::stats::ks_statistic(&ps, |x| x);
        assert!(ks_p_value(ps.len(), d) > 0.01);
    }

    #[test]
    fn prefactor_fit_inverts_expected_count() {
        let ev: Vec<_> = (0..90).map(|i| spike(i as f64, 0.5)).collect();
        let f = fit_prefactor(&ev, 10.0, 0.1).unwrap();
        assert!((f.prefactor - 1.0).abs() < 1e-12);
    }
}
