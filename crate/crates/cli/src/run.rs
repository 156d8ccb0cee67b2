//! Scenario execution and artifact writing.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use htlcflood_core::attack::{
    min_channels_guaranteed_theft, run_attack, simulated_break_even, sweep_channels,
    write_report_csv, write_sweep_trace_csv, write_trace_csv, AttackReport,
};
use htlcflood_core::fees::{
    sweep_launch_heights, write_launch_csv, write_threshold_csv, LaunchSweep,
};
use htlcflood_core::mitigation::{run_mitigation_matrix, write_matrix_csv, MitigationRun};
use htlcflood_core::{AttackConfig, FeerateStrategy};

use crate::scenario::{LoadedInputs, ScenarioFile, ScenarioKind};
use crate::{ScenarioError, Stage};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Replaces the scenario's seed.
    pub seed: Option<u64>,
    /// Worker threads for sweeps; the global pool if unset.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub kind: ScenarioKind,
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

struct Artifacts {
    files: Vec<(&'static str, Vec<u8>)>,
    lines: Vec<String>,
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

/// Parses, checks and loads the inputs of a scenario without running it.
pub fn validate_scenario(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let scenario = ScenarioFile::read(path)?;
    scenario.validate()?;
    scenario.load_inputs(base_dir(path))?;
    Ok(scenario)
}

/// Runs the scenario at `path` and writes its artifacts into `out_dir`.
/// `summary.txt` is written whether or not the run succeeds.
pub fn run_scenario(
    path: &Path,
    out_dir: &Path,
    opts: RunOptions,
) -> Result<RunSummary, ScenarioError> {
    std::fs::create_dir_all(out_dir).map_err(|e| ScenarioError::Write {
        path: out_dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut parsed = None;
    let result =
        prepare(path, opts, &mut parsed).and_then(|(s, inputs)| execute(&s, &inputs, opts.jobs));
    let written = result.and_then(|artifacts| {
        let mut files = Vec::new();
        for (name, bytes) in &artifacts.files {
            let target = out_dir.join(name);
            write_file(&target, bytes)?;
            files.push(target);
        }
        Ok((artifacts.lines, files))
    });

    let summary_path = out_dir.join("summary.txt");
    let summary = render_summary(path, parsed.as_ref(), &written);
    write_file(&summary_path, summary.as_bytes())?;
    let (lines, mut files) = written?;
    files.push(summary_path);
    Ok(RunSummary {
        kind: parsed.expect("a successful run was parsed").kind,
        lines,
        files,
    })
}

fn prepare(
    path: &Path,
    opts: RunOptions,
    parsed: &mut Option<ScenarioFile>,
) -> Result<(ScenarioFile, LoadedInputs), ScenarioError> {
    let mut scenario = ScenarioFile::read(path)?;
    if let Some(seed) = opts.seed {
        scenario.seed = seed;
    }
    *parsed = Some(scenario.clone());
    scenario.validate()?;
    let inputs = scenario.load_inputs(base_dir(path))?;
    Ok((scenario, inputs))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ScenarioError> {
    std::fs::write(path, bytes).map_err(|e| ScenarioError::Write {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn render_summary(
    path: &Path,
    scenario: Option<&ScenarioFile>,
    outcome: &Result<(Vec<String>, Vec<PathBuf>), ScenarioError>,
) -> String {
    let mut out = format!("scenario: {}\n", path.display());
    if let Some(s) = scenario {
        out += &format!("kind: {}\nseed: {}\n", s.kind.name(), s.seed);
    }
    match outcome {
        Ok((lines, _)) => {
            out += "status: ok\n";
            for l in lines {
                out += l;
                out.push('\n');
            }
        }
        Err(e) => {
            out += &format!("status: failed\nstage: {}\nerror: {e}\n", e.stage());
        }
    }
    if let Some(s) = scenario {
        out += "\n# scenario as run\n";
        out += &s.to_toml();
    }
    out
}

fn sim_err(kind: ScenarioKind) -> impl Fn(&dyn Display) -> ScenarioError {
    move |e| ScenarioError::Simulation {
        scenario: kind.name(),
        message: e.to_string(),
    }
}

fn execute(
    s: &ScenarioFile,
    inputs: &LoadedInputs,
    jobs: Option<usize>,
) -> Result<Artifacts, ScenarioError> {
    let mut cfg = s.attack_config();
    cfg.fee_series = inputs.fee_series.clone();
    match s.kind {
        ScenarioKind::Attack => attack(&cfg),
        ScenarioKind::Sweep => {
            let range = s.sweep.expect("validated");
            sweep(&cfg, range.from..=range.to, jobs)
        }
        ScenarioKind::MitigationMatrix => {
            let m = s.matrix.as_ref().expect("validated");
            let runs = run_mitigation_matrix(&cfg, &s.policies, &m.channels, jobs)
                .map_err(|e| sim_err(s.kind)(&e))?;
            matrix(&runs)
        }
        ScenarioKind::FeeAnalysis => {
            let series = inputs.fee_series.as_ref().expect("validated");
            let fa = s.fee_analysis.clone().unwrap_or_default();
            let err = sim_err(s.kind);
            let blocks = s.blocks_spec().generate(series).map_err(|e| err(&e))?;
            let strategy = FeerateStrategy::Minimize {
                duration: fa.duration,
            };
            let sweep = sweep_launch_heights(series, &blocks, strategy, fa.window, &fa.thresholds)
                .map_err(|e| err(&e))?;
            fee_analysis(&sweep)
        }
    }
}

fn csv_bytes<E: Display>(
    kind: ScenarioKind,
    write: impl FnOnce(&mut Vec<u8>) -> Result<(), E>,
) -> Result<Vec<u8>, ScenarioError> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| ScenarioError::Input {
        stage: Stage::WriteArtifacts,
        message: format!("{} csv: {e}", kind.name()),
    })?;
    Ok(buf)
}

fn closed_form(cfg: &AttackConfig) -> u64 {
    min_channels_guaranteed_theft(
        &cfg.victim_profile,
        &cfg.weights,
        cfg.blockmaxweight,
        cfg.close_delta(),
    )
}

fn report_lines(r: &AttackReport) -> Vec<String> {
    vec![
        format!("channels: {}", r.n_channels),
        format!("total_htlcs: {}", r.total_htlcs),
        format!("stolen_htlcs: {}", r.stolen_htlcs),
        format!("victim_claimed_htlcs: {}", r.victim_claimed_htlcs),
        format!("unresolved_htlcs: {}", r.unresolved_htlcs),
        format!("htlc_value_sat: {}", r.htlc_value),
        format!("stolen_value_sat: {}", r.stolen_value),
        format!("victim_fees_paid_sat: {}", r.victim_fees_paid),
        format!("attacker_cost_sat: {}", r.attacker_cost),
        format!(
            "attacker_net_gain_sat: {}",
            r.stolen_value as i128 - r.attacker_cost as i128
        ),
    ]
}

fn attack(cfg: &AttackConfig) -> Result<Artifacts, ScenarioError> {
    let kind = ScenarioKind::Attack;
    let r = run_attack(cfg).map_err(|e| sim_err(kind)(&e))?;
    let mut lines = report_lines(&r);
    lines.push(format!("closed_form_break_even: {}", closed_form(cfg)));
    Ok(Artifacts {
        files: vec![
            (
                "report.csv",
                csv_bytes(kind, |b| write_report_csv([&r], b))?,
            ),
            ("trace.csv", csv_bytes(kind, |b| write_trace_csv(&r, b))?),
        ],
        lines,
    })
}

fn sweep(
    cfg: &AttackConfig,
    range: std::ops::RangeInclusive<u32>,
    jobs: Option<usize>,
) -> Result<Artifacts, ScenarioError> {
    let kind = ScenarioKind::Sweep;
    let runs = sweep_channels(range.clone(), cfg, jobs).map_err(|e| sim_err(kind)(&e))?;
    let reports: Vec<&AttackReport> = runs.iter().map(|(_, r)| r).collect();
    let last = reports.last().expect("non-empty sweep");
    let lines = vec![
        format!(
            "channels: {}..={} ({} runs)",
            range.start(),
            range.end(),
            runs.len()
        ),
        format!("closed_form_break_even: {}", closed_form(cfg)),
        format!(
            "simulated_break_even: {}",
            simulated_break_even(&runs).map_or("none in range".to_string(), |n| n.to_string())
        ),
        format!("total_htlcs_at_{}: {}", last.n_channels, last.total_htlcs),
        format!("stolen_htlcs_at_{}: {}", last.n_channels, last.stolen_htlcs),
        format!(
            "stolen_value_sat_at_{}: {}",
            last.n_channels, last.stolen_value
        ),
    ];
    Ok(Artifacts {
        files: vec![
            (
                "report.csv",
                csv_bytes(kind, |b| write_report_csv(reports.iter().copied(), b))?,
            ),
            (
                "trace.csv",
                csv_bytes(kind, |b| write_sweep_trace_csv(reports.iter().copied(), b))?,
            ),
        ],
        lines,
    })
}

fn matrix(runs: &[MitigationRun]) -> Result<Artifacts, ScenarioError> {
    let kind = ScenarioKind::MitigationMatrix;
    let lines = runs
        .iter()
        .map(|r| {
            format!(
                "{} n={}: stolen {} ({} sat), closed-form break-even {}",
                r.row.policy_id,
                r.row.n_channels,
                r.row.stolen_htlcs,
                r.row.stolen_value_sat,
                r.row.break_even_n
            )
        })
        .collect();
    let trace = csv_bytes(kind, |b: &mut Vec<u8>| -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(b);
        w.write_record([
            "policy_id",
            "n_channels",
            "height",
            "block_weight_used",
            "victim_tx_confirmed",
            "attacker_tx_confirmed",
        ])?;
        for r in runs {
            for t in &r.report.trace {
                w.serialize((
                    &r.row.policy_id,
                    r.row.n_channels,
                    t.height,
                    t.block_weight_used,
                    t.victim_tx_confirmed,
                    t.attacker_tx_confirmed,
                ))?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(Artifacts {
        files: vec![
            (
                "report.csv",
                csv_bytes(kind, |b| write_matrix_csv(runs.iter().map(|r| &r.row), b))?,
            ),
            ("trace.csv", trace),
        ],
        lines,
    })
}

fn fee_analysis(sweep: &LaunchSweep) -> Result<Artifacts, ScenarioError> {
    let kind = ScenarioKind::FeeAnalysis;
    let n = sweep.rows.len() as f64;
    let mean =
        |f: fn(&htlcflood_core::fees::LaunchRow) -> f64| sweep.rows.iter().map(f).sum::<f64>() / n;
    let mut lines = vec![
        format!(
            "launch_heights: {}..={} ({} launches)",
            sweep.rows.first().map_or(0, |r| r.launch_height),
            sweep.rows.last().map_or(0, |r| r.launch_height),
            sweep.rows.len()
        ),
        format!("minimize_duration: {}", sweep.duration),
        format!("window: {}", sweep.window),
        format!("mean_available_space_naive: {:.0}", mean(|r| r.avg_naive)),
        format!(
            "mean_available_space_minimized: {:.0}",
            mean(|r| r.avg_minimized)
        ),
    ];
    lines.extend(sweep.thresholds.iter().map(|t| {
        format!(
            "fraction_at_or_above_{}: naive {:.4}, minimized {:.4}",
            t.threshold, t.fraction_naive, t.fraction_minimized
        )
    }));
    Ok(Artifacts {
        files: vec![
            (
                "report.csv",
                csv_bytes(kind, |b| write_threshold_csv(sweep, b))?,
            ),
            (
                "trace.csv",
                csv_bytes(kind, |b| write_launch_csv(sweep, false, b))?,
            ),
            (
                "trace_minimized.csv",
                csv_bytes(kind, |b| write_launch_csv(sweep, true, b))?,
            ),
        ],
        lines,
    })
}
