//! SUVR normalization, phase classification, and Braak staging of simulated
//! concentration curves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{BraakAtlas, BraakStage};
use crate::scheme::RegionAverager;
use crate::trajectory::Trajectory;

/// Parameters of the SUVR to normalized-concentration maps.
#[derive(Clone, Debug, PartialEq)]
pub struct SuvrMapParams {
    pub theta_low: f64,
    pub theta_high: f64,
    /// Lag-phase scaling, in (0, 1).
    pub gamma: f64,
    /// Back-shift margin, SUVR units.
    pub epsilon: f64,
    /// Amyloid positivity cutoff.
    pub positivity_cutoff: f64,
    /// Per-region tau abnormality thresholds.
    pub thresholds: BTreeMap<String, f64>,
}

impl SuvrMapParams {
    pub fn abeta() -> Self {
        Self {
            theta_low: 1.3,
            theta_high: 2.2,
            gamma: 0.25,
            epsilon: 0.1,
            positivity_cutoff: 1.55,
            thresholds: BTreeMap::new(),
        }
    }

    pub fn tau() -> Self {
        Self {
            theta_low: 0.75,
            theta_high: 2.20,
            gamma: 0.25,
            epsilon: 0.1,
            positivity_cutoff: 1.55,
            thresholds: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_low < self.theta_high) {
            return Err(Error::param(
                "theta",
                format!(
                    "theta_low {} must be below theta_high {}",
                    self.theta_low, self.theta_high
                ),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::param(
                "gamma",
                format!("must lie in (0, 1), got {}", self.gamma),
            ));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::param(
                "epsilon",
                format!("must be >= 0, got {}", self.epsilon),
            ));
        }
        Ok(())
    }

    fn ramp(&self, s: f64) -> f64 {
        ((s - self.theta_low) / (self.theta_high - self.theta_low)).clamp(0.0, 1.0)
    }
}

pub fn map_suvr_abeta(s: f64, p: &SuvrMapParams) -> f64 {
    p.ramp(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Stationary,
    Lag,
    Active,
    Saturation,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Stationary => "stationary",
            Phase::Lag => "lag",
            Phase::Active => "active",
            Phase::Saturation => "saturation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stationary" => Some(Phase::Stationary),
            "lag" => Some(Phase::Lag),
            "active" | "growth" => Some(Phase::Active),
            "saturation" | "plateau" => Some(Phase::Saturation),
            _ => None,
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn map_suvr_tau(s: f64, phase: Phase, p: &SuvrMapParams) -> f64 {
    match phase {
        Phase::Stationary => 0.0,
        Phase::Lag => p.gamma * p.ramp(s),
        Phase::Active => p.ramp(s),
        Phase::Saturation => 1.0,
    }
}

/// Phases of one region across the reported Braak stages.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseRow {
    pub phases: Vec<(BraakStage, Phase)>,
    /// The region's mean never reached its abnormality threshold.
    pub never_crossed: bool,
}

/// Classifies one region's stage-mean SUVR sequence.
///
/// `early_region` marks a Braak II region, which is active from its first
/// reported stage.
pub fn classify_phase(
    stage_means: &[(BraakStage, f64)],
    threshold: f64,
    early_region: bool,
    p: &SuvrMapParams,
) -> Result<PhaseRow> {
    p.validate()?;
    if stage_means.is_empty() {
        return Err(Error::Staging("no stage means supplied".into()));
    }
    if stage_means.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::Staging(
            "stage means must be ordered by Braak stage".into(),
        ));
    }
    let crossing = stage_means.iter().position(|(_, m)| *m >= threshold);
    let onset = if early_region {
        Some(0)
    } else {
        crossing.map(|k| {
            let before = k.saturating_sub(1);
            if k >= 1 && stage_means[before].1 < threshold - p.epsilon {
                k.saturating_sub(2)
            } else {
                before
            }
        })
    };
    let mut phases = Vec::with_capacity(stage_means.len());
    let mut floor = Phase::Stationary;
    for (k, (stage, mean)) in stage_means.iter().enumerate() {
        let raw = if *mean >= p.theta_high && onset.is_some_and(|o| k >= o) {
            Phase::Saturation
        } else if onset.is_some_and(|o| k >= o) {
            Phase::Active
        } else if *mean > p.theta_low {
            Phase::Lag
        } else {
            Phase::Stationary
        };
        floor = floor.max(raw);
        phases.push((*stage, floor));
    }
    Ok(PhaseRow {
        phases,
        never_crossed: crossing.is_none(),
    })
}

/// First time `values` reaches `level`, linearly interpolated between samples.
pub fn crossing_time(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    let k = values.iter().position(|v| *v >= level)?;
    if k == 0 {
        return Some(times[0]);
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let (v0, v1) = (values[k - 1], values[k]);
    Some(t0 + (level - v0) / (v1 - v0) * (t1 - t0))
}

/// Mean concentration of each Braak stage's regions over time.
pub fn stage_curves(
    traj: &Trajectory,
    averager: &RegionAverager,
    atlas: &BraakAtlas,
) -> Result<BTreeMap<BraakStage, Vec<f64>>> {
    atlas
        .stages()
        .map(|(stage, ids)| Ok((stage, crate::scheme::spatial_average(traj, averager, ids)?)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacrostageTimeline {
    /// Start of macrostage III-IV.
    pub t1: f64,
    /// Start of macrostage V-VI.
    pub t2: f64,
    pub t_final: f64,
    pub c_crit: f64,
    pub warnings: Vec<String>,
}

impl MacrostageTimeline {
    pub fn macrostage_at(&self, t: f64) -> &'static str {
        if t < self.t1 {
            "0-II"
        } else if t < self.t2 {
            "III-IV"
        } else {
            "V-VI"
        }
    }

    pub fn central_duration(&self) -> f64 {
        self.t2 - self.t1
    }
}

fn check_curves(times: &[f64], curves: &BTreeMap<BraakStage, Vec<f64>>, c_crit: f64) -> Result<()> {
    if !(c_crit > 0.0 && c_crit < 1.0) {
        return Err(Error::param(
            "c_crit",
            format!("must lie in (0, 1), got {c_crit}"),
        ));
    }
    if times.is_empty() {
        return Err(Error::Staging("empty time grid".into()));
    }
    for (stage, c) in curves {
        if c.len() != times.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                actual: c.len(),
            });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Staging(format!(
                "Braak {stage} curve has non-finite values"
            )));
        }
    }
    Ok(())
}

/// Macrostage boundaries from the activation of the Braak III and Braak V curves.
pub fn reconstruct_macrostages(
    times: &[f64],
    curves: &BTreeMap<BraakStage, Vec<f64>>,
    c_crit: f64,
) -> Result<MacrostageTimeline> {
    check_curves(times, curves, c_crit)?;
    let t_final = *times.last().unwrap();
    let mut warnings = Vec::new();
    let mut boundary = |stage: BraakStage| -> Result<f64> {
        let curve = curves
            .get(&stage)
            .ok_or_else(|| Error::Staging(format!("missing Braak {stage} curve")))?;
        Ok(match crossing_time(times, curve, c_crit) {
            Some(t) => t,
            None => {
                let msg = format!("Braak {stage} never reaches c_crit = {c_crit} by t = {t_final}; boundary set to T");
                log::warn!("{msg}");
                warnings.push(msg);
                t_final
            }
        })
    };
    let t1 = boundary(BraakStage::III)?;
    let t2 = boundary(BraakStage::V)?;
    if t1 > t2 + ORDER_TOLERANCE {
        return Err(Error::Staging(format!(
            "Braak III activates at {t1} after Braak V at {t2}"
        )));
    }
    Ok(MacrostageTimeline {
        t1,
        t2: t2.max(t1),
        t_final,
        c_crit,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderVerdict {
    /// II < III < IV < V < VI.
    Anatomical,
    /// All stages activate at the same time.
    Degenerate,
    /// Some stage activates before an anatomically earlier one.
    Violated,
    /// The stages that activate do so in order, but some never activate.
    Incomplete,
}

impl OrderVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            OrderVerdict::Anatomical => "anatomical",
            OrderVerdict::Degenerate => "degenerate",
            OrderVerdict::Violated => "violated",
            OrderVerdict::Incomplete => "incomplete",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActivationOrder {
    /// Stages sorted by activation time; never-activating stages last.
    pub order: Vec<(BraakStage, Option<f64>)>,
    pub verdict: OrderVerdict,
}

impl ActivationOrder {
    pub fn time_of(&self, stage: BraakStage) -> Option<f64> {
        self.order
            .iter()
            .find(|(s, _)| *s == stage)
            .and_then(|(_, t)| *t)
    }
}

/// Times closer than this are treated as simultaneous.
pub const ORDER_TOLERANCE: f64 = 1e-6;

pub fn braak_activation_order(
    times: &[f64],
    curves: &BTreeMap<BraakStage, Vec<f64>>,
    c_crit: f64,
) -> Result<ActivationOrder> {
    check_curves(times, curves, c_crit)?;
    let by_stage: Vec<(BraakStage, Option<f64>)> = curves
        .iter()
        .map(|(s, c)| (*s, crossing_time(times, c, c_crit)))
        .collect();
    let active: Vec<f64> = by_stage.iter().filter_map(|(_, t)| *t).collect();
    let all_equal = active.len() == by_stage.len()
        && active
            .iter()
            .all(|t| (t - active[0]).abs() <= ORDER_TOLERANCE);
    let in_order = by_stage.windows(2).all(|w| match (w[0].1, w[1].1) {
        (Some(a), Some(b)) => b - a > ORDER_TOLERANCE,
        (Some(_), None) | (None, None) => true,
        (None, Some(_)) => false,
    });
    let verdict = if by_stage.len() > 1 && all_equal {
        OrderVerdict::Degenerate
    } else if !in_order {
        OrderVerdict::Violated
    } else if active.len() < by_stage.len() {
        OrderVerdict::Incomplete
    } else {
        OrderVerdict::Anatomical
    };
    let mut order = by_stage;
    order.sort_by(|a, b| {
        let ka = a.1.unwrap_or(f64::INFINITY);
        let kb = b.1.unwrap_or(f64::INFINITY);
        ka.total_cmp(&kb).then(a.0.cmp(&b.0))
    });
    Ok(ActivationOrder { order, verdict })
}

/// Number of sign changes of the discrete second difference after a 3-point
/// moving average. Differences below `1e-10 * max |d2|`, or below
/// `1e-12 * (max - min)` of the values, count as zero.
pub fn inflection_count(values: &[f64]) -> usize {
    if values.len() < 5 {
        return 0;
    }
    let smooth: Vec<f64> = values
        .windows(3)
        .map(|w| (w[0] + w[1] + w[2]) / 3.0)
        .collect();
    let d2: Vec<f64> = smooth
        .windows(3)
        .map(|w| w[2] - 2.0 * w[1] + w[0])
        .collect();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    let cutoff = (1e-10 * d2.iter().fold(0.0f64, |m, v| m.max(v.abs()))).max(1e-12 * (hi - lo));
    let mut last = 0i8;
    let mut changes = 0;
    for v in d2 {
        let s = if v.abs() <= cutoff {
            0
        } else if v > 0.0 {
            1
        } else {
            -1
        };
        if s != 0 {
            if last != 0 && s != last {
                changes += 1;
            }
            last = s;
        }
    }
    changes
}

pub fn staging_report_csv(order: &ActivationOrder) -> String {
    let mut out = String::from("stage,activation_time_years,macrostage\n");
    let mut rows: Vec<_> = order.order.clone();
    rows.sort_by_key(|(s, _)| *s);
    for (stage, t) in rows {
        let t = t
            .map(|t| format!("{t:.16e}"))
            .unwrap_or_else(|| "NA".into());
        let _ = writeln!(out, "{},{},{}", stage.roman(), t, stage.macrostage());
    }
    out
}

pub fn mapping_report_csv(rows: &[(f64, Option<Phase>, f64)]) -> String {
    let mut out = String::from("s,phase,s_hat\n");
    for (s, phase, hat) in rows {
        let phase = phase.map_or("abeta", Phase::as_str);
        let _ = writeln!(out, "{s:.16e},{phase},{hat:.16e}");
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClinicalRow {
    pub protein: String,
    pub stage: BraakStage,
    pub region: String,
    pub mean_suvr: f64,
    pub sd_suvr: f64,
}

/// Reads `protein,braak_stage,region,mean_suvr,sd_suvr` rows.
pub fn parse_clinical_csv(text: &str, path: &Path) -> Result<Vec<ClinicalRow>> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("protein,") {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", f.len())));
        }
        let stage = BraakStage::parse(f[1])
            .ok_or_else(|| bad(format!("unknown Braak stage `{}`", f[1])))?;
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(format!("bad number `{s}`")))
        };
        rows.push(ClinicalRow {
            protein: f[0].to_string(),
            stage,
            region: f[2].to_string(),
            mean_suvr: num(f[3])?,
            sd_suvr: num(f[4])?,
        });
    }
    Ok(rows)
}

/// Groups clinical rows of one protein into per-region stage-mean sequences.
pub fn stage_means_by_region(
    rows: &[ClinicalRow],
    protein: &str,
) -> BTreeMap<String, Vec<(BraakStage, f64)>> {
    let mut out: BTreeMap<String, BTreeMap<BraakStage, f64>> = BTreeMap::new();
    for r in rows
        .iter()
        .filter(|r| r.protein.eq_ignore_ascii_case(protein))
    {
        out.entry(r.region.clone())
            .or_default()
            .insert(r.stage, r.mean_suvr);
    }
    out.into_iter()
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect()
}

/// Stages named in the clinical rows, for diagnostics.
pub fn clinical_stages(rows: &[ClinicalRow]) -> BTreeSet<BraakStage> {
    rows.iter().map(|r| r.stage).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use BraakStage::*;

    #[test]
    fn abeta_map_goldens() {
        let p = SuvrMapParams::abeta();
        assert_eq!(map_suvr_abeta(1.3, &p), 0.0);
        assert_eq!(map_suvr_abeta(2.2, &p), 1.0);
        assert!((map_suvr_abeta(1.75, &p) - 0.5).abs() < 1e-12);
        assert!((map_suvr_abeta(1.55, &p) - 0.25 / 0.9).abs() < 1e-12);
        assert_eq!(map_suvr_abeta(0.2, &p), 0.0);
        assert_eq!(map_suvr_abeta(9.0, &p), 1.0);
    }

    #[test]
    fn tau_map_goldens() {
        let p = SuvrMapParams::tau();
        assert!((map_suvr_tau(1.475, Phase::Active, &p) - 0.5).abs() < 1e-12);
        assert!((map_suvr_tau(1.475, Phase::Lag, &p) - 0.125).abs() < 1e-12);
        for ph in [Phase::Lag, Phase::Active, Phase::Stationary] {
            assert_eq!(map_suvr_tau(0.75, ph, &p), 0.0);
        }
        assert_eq!(map_suvr_tau(0.9, Phase::Saturation, &p), 1.0);
    }

    fn seq(means: [f64; 5]) -> Vec<(BraakStage, f64)> {
        BraakStage::ALL.iter().copied().zip(means).collect()
    }

    #[test]
    fn crossing_at_v_near_threshold_activates_from_iv() {
        let p = SuvrMapParams::tau();
        let row = classify_phase(&seq([0.9, 1.0, 1.15, 1.3, 1.5]), 1.2, false, &p).unwrap();
        let ph: Vec<Phase> = row.phases.iter().map(|x| x.1).collect();
        assert_eq!(
            ph,
            [
                Phase::Lag,
                Phase::Lag,
                Phase::Active,
                Phase::Active,
                Phase::Active
            ]
        );
        assert!(!row.never_crossed);
    }

    #[test]
    fn crossing_at_v_far_below_threshold_shifts_back_two() {
        let p = SuvrMapParams::tau();
        let row = classify_phase(&seq([0.9, 1.0, 1.05, 1.3, 1.5]), 1.2, false, &p).unwrap();
        assert_eq!(row.phases[1], (III, Phase::Active));
        assert_eq!(row.phases[0], (II, Phase::Lag));
    }

    #[test]
    fn early_region_is_active_from_first_stage() {
        let p = SuvrMapParams::tau();
        let row = classify_phase(&seq([1.0, 1.1, 1.2, 1.4, 2.3]), 5.0, true, &p).unwrap();
        assert_eq!(row.phases[0], (II, Phase::Active));
        assert_eq!(row.phases[4], (VI, Phase::Saturation));
        assert!(row.never_crossed);
    }

    #[test]
    fn phases_never_move_backwards() {
        let p = SuvrMapParams::tau();
        let row = classify_phase(&seq([0.9, 2.3, 1.3, 0.7, 1.5]), 1.2, false, &p).unwrap();
        assert!(row.phases.windows(2).all(|w| w[0].1 <= w[1].1));
        let never = classify_phase(&seq([0.7, 0.8, 0.9, 1.0, 1.1]), 1.5, false, &p).unwrap();
        assert!(never.never_crossed);
        assert_eq!(never.phases[0].1, Phase::Stationary);
        assert!(never.phases.iter().all(|x| x.1 <= Phase::Lag));
    }

    fn logistic_curve(times: &[f64], c0: f64, a: f64) -> Vec<f64> {
        times
            .iter()
            .map(|t| {
                let e = (a * t).exp();
                c0 * e / (1.0 - c0 + c0 * e)
            })
            .collect()
    }

    #[test]
    fn logistic_crossing_time() {
        let times: Vec<f64> = (0..=2000).map(|n| n as f64 * 0.005).collect();
        let c = logistic_curve(&times, 0.1, 0.7);
        let t = crossing_time(&times, &c, 0.5).unwrap();
        assert!((t - 9f64.ln() / 0.7).abs() < 1e-4, "{t}");
        assert_eq!(crossing_time(&times, &c, 2.0), None);
    }

    fn shifted_curves(times: &[f64], shifts: [f64; 5]) -> BTreeMap<BraakStage, Vec<f64>> {
        BraakStage::ALL
            .iter()
            .zip(shifts)
            .map(|(s, d)| {
                let shifted: Vec<f64> = times.iter().map(|t| t - d).collect();
                (*s, logistic_curve(&shifted, 0.1, 0.7))
            })
            .collect()
    }

    #[test]
    fn macrostages_shift_earlier_for_lower_threshold() {
        let times: Vec<f64> = (0..=800).map(|n| n as f64 * 0.05).collect();
        let curves = shifted_curves(&times, [0.0, 2.0, 4.0, 6.0, 8.0]);
        let a = reconstruct_macrostages(&times, &curves, 0.5).unwrap();
        let b = reconstruct_macrostages(&times, &curves, 0.4).unwrap();
        assert!(b.t1 < a.t1 && b.t2 < a.t2);
        assert!(a.t1 < a.t2);
        assert!(a.warnings.is_empty());
        assert_eq!(a.macrostage_at(0.0), "0-II");
        assert_eq!(a.macrostage_at(a.t2 + 1.0), "V-VI");
    }

    #[test]
    fn flat_curves_put_both_boundaries_at_t() {
        let times: Vec<f64> = (0..=10).map(|n| n as f64).collect();
        let curves: BTreeMap<_, _> = BraakStage::ALL
            .iter()
            .map(|s| (*s, vec![0.0; 11]))
            .collect();
        let m = reconstruct_macrostages(&times, &curves, 0.5).unwrap();
        assert_eq!((m.t1, m.t2), (10.0, 10.0));
        assert_eq!(m.warnings.len(), 2);
        assert!(reconstruct_macrostages(&times, &curves, 1.5).is_err());
    }

    #[test]
    fn activation_order_verdicts() {
        let times: Vec<f64> = (0..=800).map(|n| n as f64 * 0.05).collect();
        let ordered = braak_activation_order(
            &times,
            &shifted_curves(&times, [0.0, 1.0, 2.0, 3.0, 4.0]),
            0.5,
        )
        .unwrap();
        assert_eq!(ordered.verdict, OrderVerdict::Anatomical);
        let same = braak_activation_order(&times, &shifted_curves(&times, [0.0; 5]), 0.5).unwrap();
        assert_eq!(same.verdict, OrderVerdict::Degenerate);
        let bad = braak_activation_order(
            &times,
            &shifted_curves(&times, [0.0, 1.0, 2.0, 3.0, -1.0]),
            0.5,
        )
        .unwrap();
        assert_eq!(bad.verdict, OrderVerdict::Violated);
        assert_eq!(bad.order[0].0, VI);
    }

    #[test]
    fn logistic_has_one_inflection() {
        let times: Vec<f64> = (0..=800).map(|n| n as f64 * 0.05).collect();
        assert_eq!(inflection_count(&logistic_curve(&times, 0.1, 0.7)), 1);
        let line: Vec<f64> = times.iter().map(|t| 2.0 * t).collect();
        assert_eq!(inflection_count(&line), 0);
    }

    #[test]
    fn clinical_rows_parse() {
        let text = "protein,braak_stage,region,mean_suvr,sd_suvr\ntau,III,amygdala,1.3,0.2\ntau,II,amygdala,1.1,0.1\n";
        let rows = parse_clinical_csv(text, Path::new("c.csv")).unwrap();
        assert_eq!(rows.len(), 2);
        let by = stage_means_by_region(&rows, "TAU");
        assert_eq!(by["amygdala"], vec![(II, 1.1), (III, 1.3)]);
        assert!(parse_clinical_csv("tau,IX,a,1,1\n", Path::new("c.csv")).is_err());
    }
}
