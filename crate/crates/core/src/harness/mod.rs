//! Monte-Carlo attack campaigns and their CSV outputs.
//!
//! A trial draws noisy telemetry from the ground-truth state, estimates the
//! pre-attack state, synthesizes and forges an attack on converter 1, then
//! re-estimates from the forged vector. Trials are independent and run in
//! parallel; results are always sorted before they are reported.

mod figures;

use rayon::prelude::*;

use crate::attacksynth::{
    forge_measurements, synthesize, AttackPlan, AttackSpec, TargetMode, DEFAULT_DELTA,
};
use crate::capability::{chart_params, is_safe, operating_point_from_state, OperatingPoint};
use crate::measmodel::{
    build_config, generate_measurements, mix_seed, Location, MeasurementKind, MeasurementVector,
    StateVector, DEFAULT_SIGMA,
};
use crate::netcase::{NetworkCase, Side};
use crate::wls::{estimate, EstimationResult, DEFAULT_THRESHOLD};
use crate::{Error, Result};

pub use figures::{emit_figures, representative_trial, summary_csv, sweep_csv, trial_chart_csv};

/// Regenerations allowed before a trial is declared invalid.
pub const MAX_REGENERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSettings {
    pub group: u8,
    pub r1: f64,
    pub r2: f64,
    pub delta: f64,
    pub sigma: f64,
    pub threshold: f64,
    pub forge_noise: bool,
    pub target_mode: TargetMode,
}

impl TrialSettings {
    pub fn new(group: u8, r: f64) -> Self {
        Self {
            group,
            r1: r,
            r2: r,
            delta: DEFAULT_DELTA,
            sigma: DEFAULT_SIGMA,
            threshold: DEFAULT_THRESHOLD,
            forge_noise: true,
            target_mode: TargetMode::Region,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TamperedEntry {
    pub index: usize,
    pub kind: MeasurementKind,
    pub location: Location,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    /// False when no clean pre-attack draw was found within the cap.
    pub valid: bool,
    /// Draws discarded before the accepted one.
    pub regenerations: usize,
    pub pre_attack_rn_max: f64,
    pub post_attack_rn_max: f64,
    /// Feasible attack whose forged data pass the residual test.
    pub success: bool,
    pub feasible: bool,
    pub cost: usize,
    pub l2_distance: f64,
    pub tampered: Vec<TamperedEntry>,
    pub true_op: OperatingPoint,
    pub estimated_op_pre: OperatingPoint,
    pub estimated_op_post: OperatingPoint,
    pub u_s_true: f64,
    pub u_s_pre: f64,
    pub u_s_post: f64,
    /// Truth inside the margin region of the chart at the true terminal voltage.
    pub inside_pre: bool,
    /// Post-attack estimate inside the margin region of the chart at the
    /// estimated terminal voltage.
    pub inside_post: bool,
}

impl TrialOutcome {
    fn invalid(seed: u64, true_op: OperatingPoint, u_s_true: f64, inside_pre: bool) -> Self {
        let nan = OperatingPoint::new(f64::NAN, f64::NAN);
        Self {
            seed,
            valid: false,
            regenerations: MAX_REGENERATIONS,
            pre_attack_rn_max: f64::NAN,
            post_attack_rn_max: f64::NAN,
            success: false,
            feasible: false,
            cost: 0,
            l2_distance: f64::NAN,
            tampered: Vec::new(),
            true_op,
            estimated_op_pre: nan,
            estimated_op_post: nan,
            u_s_true,
            u_s_pre: f64::NAN,
            u_s_post: f64::NAN,
            inside_pre,
            inside_post: false,
        }
    }
}

/// Seed of the `k`-th telemetry draw of trial `seed`.
pub fn draw_seed(seed: u64, k: usize) -> u64 {
    mix_seed(seed, k as u64)
}

pub fn run_trial(
    case: &NetworkCase,
    truth: &StateVector,
    settings: &TrialSettings,
    seed: u64,
) -> Result<TrialOutcome> {
    let side = Side::One;
    let s = case.converter(side).ac_bus - 1;
    let config = build_config(case, settings.group)?.with_sigma(settings.sigma)?;
    let flat = StateVector::flat(case.n_bus());

    let true_op = operating_point_from_state(case, truth, side);
    let u_s_true = truth.vmag[s];
    let true_chart = chart_params(case, side, u_s_true)?;
    let inside_pre = is_safe(true_op, &true_chart, settings.r1, settings.r2);

    let mut accepted: Option<(usize, u64, MeasurementVector, EstimationResult)> = None;
    for k in 0..MAX_REGENERATIONS {
        let draw = draw_seed(seed, k);
        let z = generate_measurements(case, &config, truth, draw, 1.0);
        let est = estimate(case, &config, &z, &flat)?;
        if est.converged && est.max_normalized_residual() <= settings.threshold {
            accepted = Some((k, draw, z, est));
            break;
        }
    }
    let Some((regenerations, draw, z_c, pre)) = accepted else {
        return Ok(TrialOutcome::invalid(seed, true_op, u_s_true, inside_pre));
    };

    let mut spec = AttackSpec::new(case, settings.r1, settings.r2);
    spec.delta = settings.delta;
    spec.target_mode = settings.target_mode;
    let plan = match synthesize(case, &config, &z_c, &pre.x_hat, &spec) {
        Ok(p) => p,
        Err(Error::InfeasibleTarget(_)) => AttackPlan {
            feasible: false,
            ..AttackPlan::no_op(&pre.x_hat, &z_c)
        },
        Err(e) => return Err(e),
    };
    let z_a = forge_measurements(
        case,
        &config,
        &plan,
        &z_c,
        mix_seed(draw, 0xa77ac),
        settings.forge_noise,
    );
    let post = estimate(case, &config, &z_a, &flat)?;
    let post_rn = if post.converged {
        post.max_normalized_residual()
    } else {
        f64::INFINITY
    };
    let op_pre = operating_point_from_state(case, &pre.x_hat, side);
    let op_post = operating_point_from_state(case, &post.x_hat, side);
    let u_s_post = post.x_hat.vmag[s];
    let post_chart = chart_params(case, side, u_s_post)?;
    let tampered = plan
        .tampered
        .iter()
        .map(|&i| TamperedEntry {
            index: i,
            kind: config.spec(i).kind,
            location: config.spec(i).location,
            before: z_c.values[i],
            after: z_a.values[i],
        })
        .collect();
    Ok(TrialOutcome {
        seed,
        valid: true,
        regenerations,
        pre_attack_rn_max: pre.max_normalized_residual(),
        post_attack_rn_max: post_rn,
        success: plan.feasible && post_rn < settings.threshold,
        feasible: plan.feasible,
        cost: plan.cost,
        l2_distance: plan.l2_distance,
        tampered,
        true_op,
        estimated_op_pre: op_pre,
        estimated_op_post: op_post,
        u_s_true,
        u_s_pre: pre.x_hat.vmag[s],
        u_s_post,
        inside_pre,
        inside_post: is_safe(op_post, &post_chart, settings.r1, settings.r2),
    })
}

/// Aggregate over the trials of one `(group, r1, r2)` setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingSummary {
    pub settings: TrialSettings,
    pub trials: Vec<TrialOutcome>,
    pub valid: usize,
    pub invalid: usize,
    pub successes: usize,
    /// Successes over valid trials; NaN when no trial is valid.
    pub success_rate: f64,
    /// Most frequent tamper count among valid feasible trials (smallest on ties).
    pub tampered_mode: Option<usize>,
    pub tampered_min: Option<usize>,
    pub tampered_max: Option<usize>,
    pub mean_post_rn_max: f64,
}

impl SettingSummary {
    pub fn from_trials(settings: TrialSettings, trials: Vec<TrialOutcome>) -> Self {
        let valid: Vec<&TrialOutcome> = trials.iter().filter(|t| t.valid).collect();
        let successes = valid.iter().filter(|t| t.success).count();
        let costs: Vec<usize> = valid
            .iter()
            .filter(|t| t.feasible)
            .map(|t| t.cost)
            .collect();
        let mut counts = std::collections::BTreeMap::new();
        for &c in &costs {
            *counts.entry(c).or_insert(0usize) += 1;
        }
        let tampered_mode = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(c, _)| *c);
        let finite: Vec<f64> = valid
            .iter()
            .map(|t| t.post_attack_rn_max)
            .filter(|v| v.is_finite())
            .collect();
        Self {
            valid: valid.len(),
            invalid: trials.len() - valid.len(),
            successes,
            success_rate: if valid.is_empty() {
                f64::NAN
            } else {
                successes as f64 / valid.len() as f64
            },
            tampered_mode,
            tampered_min: costs.iter().min().copied(),
            tampered_max: costs.iter().max().copied(),
            mean_post_rn_max: finite.iter().sum::<f64>() / finite.len().max(1) as f64,
            settings,
            trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    /// One entry per setting, ordered by group then by position in the r list.
    pub settings: Vec<SettingSummary>,
}

impl ExperimentSummary {
    pub fn find(&self, group: u8, r: f64) -> Option<&SettingSummary> {
        self.settings
            .iter()
            .find(|s| s.settings.group == group && s.settings.r1 == r)
    }
}

/// Runs `n_trials` seeds `seed0..seed0 + n_trials` for every group and
/// margin. The same seeds are used for every setting.
pub fn run_experiment(
    case: &NetworkCase,
    truth: &StateVector,
    groups: &[u8],
    r_values: &[f64],
    n_trials: usize,
    seed0: u64,
    base: &TrialSettings,
) -> Result<ExperimentSummary> {
    if n_trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let settings: Vec<TrialSettings> = groups
        .iter()
        .flat_map(|&g| {
            r_values.iter().map(move |&r| TrialSettings {
                group: g,
                r1: r,
                r2: r,
                ..base.clone()
            })
        })
        .collect();
    let jobs: Vec<(usize, u64)> = (0..settings.len())
        .flat_map(|k| (0..n_trials as u64).map(move |t| (k, seed0 + t)))
        .collect();
    let results: Vec<Result<(usize, TrialOutcome)>> = jobs
        .par_iter()
        .map(|&(k, seed)| run_trial(case, truth, &settings[k], seed).map(|t| (k, t)))
        .collect();
    let mut per: Vec<Vec<TrialOutcome>> = vec![Vec::new(); settings.len()];
    for r in results {
        let (k, t) = r?;
        per[k].push(t);
    }
    let settings = settings
        .into_iter()
        .zip(per)
        .map(|(s, mut trials)| {
            trials.sort_by_key(|t| t.seed);
            SettingSummary::from_trials(s, trials)
        })
        .collect();
    Ok(ExperimentSummary { settings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::bundled_ieee14_case;

    #[test]
    fn trial_is_deterministic() {
        let (case, op) = bundled_ieee14_case();
        let s = TrialSettings::new(1, 1.0);
        let a = run_trial(&case, &op.state, &s, 4).unwrap();
        let b = run_trial(&case, &op.state, &s, 4).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert!(a.valid);
        assert!(!a.inside_pre);
    }

    #[test]
    fn single_trial_summary_matches_trial() {
        let (case, op) = bundled_ieee14_case();
        let base = TrialSettings::new(1, 1.0);
        let sum = run_experiment(&case, &op.state, &[2], &[1.0], 1, 10, &base).unwrap();
        let t = run_trial(&case, &op.state, &TrialSettings::new(2, 1.0), 10).unwrap();
        let row = &sum.settings[0];
        assert_eq!(row.trials.len(), 1);
        assert_eq!(format!("{:?}", row.trials[0]), format!("{t:?}"));
        assert_eq!(row.success_rate, if t.success { 1.0 } else { 0.0 });
        assert_eq!(row.tampered_mode, Some(t.cost));
    }
}
