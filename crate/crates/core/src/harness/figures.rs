use std::fmt::Write as _;
use std::path::Path;

use super::{ExperimentSummary, SettingSummary, TrialOutcome};
use crate::capability::{chart_csv, chart_params, sample_chart};
use crate::netcase::{NetworkCase, Side};
use crate::{Error, Result};

const CHART_RESOLUTION: usize = 360;

fn opt(v: Option<usize>) -> String {
    v.map(|c| c.to_string()).unwrap_or_default()
}

/// One row per setting.
pub fn summary_csv(summary: &ExperimentSummary) -> String {
    let mut out = String::from(
        "group,r1,r2,trials,valid,invalid,successes,success_rate,tampered_mode,tampered_min,tampered_max,mean_post_rn_max\n",
    );
    for s in &summary.settings {
        let t = &s.settings;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.6},{},{},{},{:.6}",
            t.group,
            t.r1,
            t.r2,
            s.trials.len(),
            s.valid,
            s.invalid,
            s.successes,
            s.success_rate,
            opt(s.tampered_mode),
            opt(s.tampered_min),
            opt(s.tampered_max),
            s.mean_post_rn_max
        );
    }
    out
}

/// Success rate and tamper count against measurement group.
pub fn sweep_csv(summary: &ExperimentSummary) -> String {
    let mut out = String::from("group,r1,r2,success_rate,tampered_mode\n");
    for s in &summary.settings {
        let t = &s.settings;
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{}",
            t.group,
            t.r1,
            t.r2,
            s.success_rate,
            opt(s.tampered_mode)
        );
    }
    out
}

fn residuals_csv(summary: &ExperimentSummary) -> String {
    let mut out = String::from("group,r1,r2,seed,pre_rn_max,post_rn_max,success\n");
    for s in &summary.settings {
        for t in s.trials.iter().filter(|t| t.valid) {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.12e},{:.12e},{}",
                s.settings.group,
                s.settings.r1,
                s.settings.r2,
                t.seed,
                t.pre_attack_rn_max,
                t.post_attack_rn_max,
                t.success
            );
        }
    }
    out
}

fn tampered_csv(summary: &ExperimentSummary) -> String {
    let mut out = String::from("group,r1,r2,seed,index,kind,location,z_before,z_after\n");
    for s in &summary.settings {
        for t in s.trials.iter().filter(|t| t.valid) {
            for e in &t.tampered {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{:.16e},{:.16e}",
                    s.settings.group,
                    s.settings.r1,
                    s.settings.r2,
                    t.seed,
                    e.index,
                    e.kind,
                    e.location,
                    e.before,
                    e.after
                );
            }
        }
    }
    out
}

/// Trial drawn in the chart file: the lowest-seed successful trial of the
/// first setting that has one, else the first valid trial overall.
pub fn representative_trial(
    summary: &ExperimentSummary,
) -> Option<(&SettingSummary, &TrialOutcome)> {
    let pick = |pred: &dyn Fn(&TrialOutcome) -> bool| {
        summary
            .settings
            .iter()
            .find_map(|s| s.trials.iter().find(|t| pred(t)).map(|t| (s, t)))
    };
    pick(&|t| t.valid && t.success).or_else(|| pick(&|t| t.valid))
}

/// Chart of converter 1 at the post-attack estimated terminal voltage of
/// `trial`, with the true and estimated operating points.
pub fn trial_chart_csv(
    case: &NetworkCase,
    setting: &SettingSummary,
    trial: &TrialOutcome,
) -> Result<String> {
    let chart = chart_params(case, Side::One, trial.u_s_post)?;
    let lines = sample_chart(
        &chart,
        setting.settings.r1,
        setting.settings.r2,
        CHART_RESOLUTION,
    )?;
    Ok(chart_csv(
        &lines,
        &[
            ("true_point", trial.true_op),
            ("estimate_pre", trial.estimated_op_pre),
            ("estimate_post", trial.estimated_op_post),
        ],
    ))
}

/// Writes `summary.csv`, `sweep.csv`, `residuals.csv`, `tampered.csv` and,
/// when any trial is valid, `pq_chart.csv` into `out_dir`.
pub fn emit_figures(
    case: &NetworkCase,
    summary: &ExperimentSummary,
    out_dir: &Path,
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = vec![
        ("summary.csv", summary_csv(summary)),
        ("sweep.csv", sweep_csv(summary)),
        ("residuals.csv", residuals_csv(summary)),
        ("tampered.csv", tampered_csv(summary)),
    ];
    if let Some((s, t)) = representative_trial(summary) {
        files.push(("pq_chart.csv", trial_chart_csv(case, s, t)?));
    }
    let mut written = Vec::new();
    for (name, text) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
