use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind, OutputFormat};
use crate::adversary::{security_report_from_counts, AttackModel, Normalization, SecurityOptions, SecurityReport};
use crate::error::Result;
use crate::optics::{ApparatusConfig, Detector, Setting};
use crate::protocol::{CarrierCounts, CountTable, EveCounts, Session, SessionTally, SettingPolicy};
use crate::rng::child_id;
use crate::stats::{
    qber_corrected, simulate_scan, stability_trace, visibility, Background, Exposure, FringeScan, QberEstimate,
    StabilityTrace, VisibilityFit,
};

const TABLE1_STREAM: u64 = 0x7AB1;

/// Error rate of the key from observed counts; the corrected value removes
/// the per-gate D1 background of the apparatus.
pub fn counts_qber(counts: &CountTable, cfg: &ApparatusConfig) -> Result<QberEstimate> {
    let [i0, k0, i1, k1] = [0, 1, 2, 3];
    let c_int = counts.clicks[i0][1] + counts.clicks[i1][1];
    let c_nint = counts.clicks[k0][1] + counts.clicks[k1][1];
    let exposure = Exposure {
        interfering: counts.rounds[i0] + counts.rounds[i1],
        non_interfering: counts.rounds[k0] + counts.rounds[k1],
    };
    let background = Background {
        dark_rate: cfg.dark_prob.d1,
        accidental_rate: 0.0,
    };
    qber_corrected(c_int, c_nint, background, exposure)
}

/// Runs a session with the channel tap the attack model calls for.
pub fn run_attacked(session: Session<'_>, attack: &AttackModel) -> Result<SessionTally> {
    attack.validate()?;
    match attack.tap() {
        Some(tap) => session.with_tap(&tap).run(),
        None => session.run(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub duration_s: f64,
    pub attack: AttackModel,
    pub qber: QberEstimate,
    /// Every key bit came from a D1 click whose photon never entered Bob's
    /// arm.
    pub key_counterfactual: bool,
    pub tally: SessionTally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub scan: FringeScan,
    pub fit_d0: Option<VisibilityFit>,
    pub fit_d1: Option<VisibilityFit>,
    pub fit_error: Option<String>,
    pub mean_d2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub total_s: f64,
    /// Variance over mean of the per-bin counts, D0, D1, D2.
    pub fano: [f64; 3],
    pub trace: StabilityTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityRunReport {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub duration_s: f64,
    pub attack: AttackModel,
    pub counts: CountTable,
    pub eve: EveCounts,
    pub carrier: CarrierCounts,
    pub report: SecurityReport,
    pub all_normalizations: Vec<SecurityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Column {
    pub setting: Setting,
    pub label: String,
    /// Mean counts per session, D0, D1, D2.
    pub mean: [f64; 3],
    /// Sample standard deviation over sessions.
    pub sd: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub sessions: u32,
    pub duration_s: f64,
    pub columns: Vec<Table1Column>,
    pub qber: QberEstimate,
}

/// Serialized result of one run plus its summary line.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub summary: String,
    pub bytes: Vec<u8>,
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
}

fn theta(bit: bool) -> &'static str {
    if bit {
        "pi/2"
    } else {
        "0"
    }
}

fn fano(xs: &[u64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<u64>() as f64 / n;
    if mean <= 0.0 || xs.len() < 2 {
        return 0.0;
    }
    let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var / mean
}

fn session_artifact(cfg: &ExperimentConfig) -> Result<Artifact> {
    let session = Session::new(&cfg.apparatus, cfg.duration_s, cfg.seed);
    let tally = run_attacked(session, &cfg.attack)?;
    let counts = CountTable::from_tally(&tally);
    let qber = counts_qber(&counts, &cfg.apparatus)?;
    let report = SessionReport {
        experiment: cfg.experiment,
        seed: cfg.seed,
        duration_s: cfg.duration_s,
        attack: cfg.attack,
        qber,
        key_counterfactual: tally.carrier.key_rounds_carrier_in_b == 0,
        tally,
    };
    let summary = format!(
        "session: {} heralds, {} key bits, {} errors announced, QBER {:.4} +/- {:.4}",
        report.tally.heralds,
        report.tally.key_alice.len(),
        report.tally.error_count,
        report.qber.qber.value,
        report.qber.qber.sigma
    );
    let bytes = match cfg.output.format {
        OutputFormat::Json => to_json(&report)?,
        OutputFormat::Csv => csv_bytes(
            &["theta_a", "theta_b", "rounds", "C_D0", "C_D1", "C_D2"],
            Setting::TABLE_ORDER
                .iter()
                .map(|s| {
                    let c = report.tally.setting(*s);
                    vec![
                        theta(s.a).to_string(),
                        theta(s.b).to_string(),
                        c.rounds.to_string(),
                        c.clicks[0].to_string(),
                        c.clicks[1].to_string(),
                        c.clicks[2].to_string(),
                    ]
                })
                .collect(),
        )?,
    };
    Ok(Artifact { summary, bytes })
}

fn scan_artifact(cfg: &ExperimentConfig) -> Result<Artifact> {
    let scan = simulate_scan(&cfg.apparatus, &cfg.scan.spec(cfg.duration_s), cfg.seed)?;
    let fits = visibility(&scan, Detector::D0).and_then(|a| Ok((a, visibility(&scan, Detector::D1)?)));
    let (fit_d0, fit_d1, fit_error) = match fits {
        Ok((a, b)) => (Some(a), Some(b), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    let mean_d2 = scan.counts_d2.iter().sum::<u64>() as f64 / scan.counts_d2.len() as f64;
    let report = ScanReport {
        experiment: cfg.experiment,
        seed: cfg.seed,
        scan,
        fit_d0,
        fit_d1,
        fit_error,
        mean_d2,
    };
    let summary = match (&report.fit_d0, &report.fit_d1) {
        (Some(a), Some(b)) => format!(
            "scan: {} points, V_D0 {:.3} +/- {:.3}, V_D1 {:.3} +/- {:.3}, period {:.4} um",
            report.scan.displacements_um.len(),
            a.visibility.value,
            a.visibility.sigma,
            b.visibility.value,
            b.visibility.sigma,
            a.period_um
        ),
        _ => format!(
            "scan: {} points, no fringe fit ({})",
            report.scan.displacements_um.len(),
            report.fit_error.as_deref().unwrap_or("unknown")
        ),
    };
    let bytes = match cfg.output.format {
        OutputFormat::Json => to_json(&report)?,
        OutputFormat::Csv => {
            let s = &report.scan;
            let fit = |f: &Option<VisibilityFit>, x: f64| f.as_ref().map_or(String::new(), |f| f.predict(x).to_string());
            csv_bytes(
                &["displacement_um", "C_D0", "C_D1", "C_D2", "fit_D0", "fit_D1"],
                (0..s.displacements_um.len())
                    .map(|i| {
                        let x = s.displacements_um[i];
                        vec![
                            x.to_string(),
                            s.counts_d0[i].to_string(),
                            s.counts_d1[i].to_string(),
                            s.counts_d2[i].to_string(),
                            fit(&report.fit_d0, x),
                            fit(&report.fit_d1, x),
                        ]
                    })
                    .collect(),
            )?
        }
    };
    Ok(Artifact { summary, bytes })
}

fn stability_artifact(cfg: &ExperimentConfig) -> Result<Artifact> {
    let p = &cfg.stability;
    let trace = stability_trace(&cfg.apparatus, p.setting, cfg.duration_s, p.bin_s, p.drift, cfg.seed)?;
    let report = StabilityReport {
        experiment: cfg.experiment,
        seed: cfg.seed,
        total_s: cfg.duration_s,
        fano: [fano(&trace.counts_d0), fano(&trace.counts_d1), fano(&trace.counts_d2)],
        trace,
    };
    let summary = format!(
        "stability: {} bins of {} s, variance/mean D0 {:.3}, D1 {:.3}, D2 {:.3}",
        report.trace.counts_d0.len(),
        p.bin_s,
        report.fano[0],
        report.fano[1],
        report.fano[2]
    );
    let bytes = match cfg.output.format {
        OutputFormat::Json => to_json(&report)?,
        OutputFormat::Csv => {
            let t = &report.trace;
            csv_bytes(
                &["bin_start_s", "delta_um", "C_D0", "C_D1", "C_D2"],
                (0..t.bin_start_s.len())
                    .map(|i| {
                        vec![
                            t.bin_start_s[i].to_string(),
                            t.delta_um[i].to_string(),
                            t.counts_d0[i].to_string(),
                            t.counts_d1[i].to_string(),
                            t.counts_d2[i].to_string(),
                        ]
                    })
                    .collect(),
            )?
        }
    };
    Ok(Artifact { summary, bytes })
}

fn security_artifact(cfg: &ExperimentConfig) -> Result<Artifact> {
    let session = Session::new(&cfg.apparatus, cfg.duration_s, cfg.seed);
    let tally = run_attacked(session, &cfg.attack)?;
    if tally.is_empty() {
        return Err(crate::Error::EmptyTally("session recorded no heralded rounds".into()));
    }
    let counts = CountTable::from_tally(&tally);
    let opts = |normalization: Normalization| SecurityOptions {
        normalization,
        gamma: cfg.security.gamma,
        eta: cfg.security.eta,
    };
    let report = security_report_from_counts(&counts, &cfg.apparatus, &opts(cfg.normalization))?;
    let all_normalizations = Normalization::ALL
        .into_iter()
        .map(|n| security_report_from_counts(&counts, &cfg.apparatus, &opts(n)))
        .collect::<Result<Vec<_>>>()?;
    let run = SecurityRunReport {
        experiment: cfg.experiment,
        seed: cfg.seed,
        duration_s: cfg.duration_s,
        attack: cfg.attack,
        counts,
        eve: tally.eve,
        carrier: tally.carrier,
        report,
        all_normalizations,
    };
    let r = &run.report;
    let summary = format!(
        "security ({}): m_IR {:.4} +/- {:.4}, m_TS {:.4} +/- {:.4}, QBER {:.4}",
        r.normalization, r.m_ir.value, r.m_ir.sigma, r.m_ts.value, r.m_ts.sigma, r.qber.value
    );
    let bytes = match cfg.output.format {
        OutputFormat::Json => to_json(&run)?,
        OutputFormat::Csv => csv_bytes(
            &[
                "normalization",
                "P_D1",
                "P_e1",
                "P_D2",
                "P_e2",
                "QBER",
                "gamma",
                "eta",
                "m_IR",
                "m_IR_sigma",
                "delta_I_AE",
                "m_TS",
                "m_TS_sigma",
            ],
            run.all_normalizations
                .iter()
                .map(|r| {
                    vec![
                        r.normalization.tag().to_string(),
                        r.p_d1.to_string(),
                        r.p_e1.to_string(),
                        r.p_d2.to_string(),
                        r.p_e2.to_string(),
                        r.qber.value.to_string(),
                        r.gamma.to_string(),
                        r.eta.to_string(),
                        r.m_ir.value.to_string(),
                        r.m_ir.sigma.to_string(),
                        r.delta_i_ae.to_string(),
                        r.m_ts.value.to_string(),
                        r.m_ts.sigma.to_string(),
                    ]
                })
                .collect(),
        )?,
    };
    Ok(Artifact { summary, bytes })
}

/// Runs `sessions` fixed-setting sessions for every setting and returns the
/// tallies grouped by setting in table order.
pub fn table1_sessions(cfg: &ApparatusConfig, sessions: u32, duration_s: f64, seed: u64) -> Result<Vec<Vec<SessionTally>>> {
    let n = sessions as u64;
    let flat = (0..4 * n)
        .into_par_iter()
        .map(|j| {
            let setting = Setting::TABLE_ORDER[(j / n) as usize];
            Session::new(cfg, duration_s, seed)
                .policy(SettingPolicy::Fixed(setting))
                .stream(child_id(TABLE1_STREAM, j))
                .run()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(flat.chunks(sessions as usize).map(|c| c.to_vec()).collect())
}

pub fn table1_report(cfg: &ApparatusConfig, sessions: u32, duration_s: f64, seed: u64) -> Result<Table1Report> {
    let groups = table1_sessions(cfg, sessions, duration_s, seed)?;
    let mut columns = Vec::with_capacity(4);
    let mut totals = CountTable {
        rounds: [0.0; 4],
        clicks: [[0.0; 3]; 4],
    };
    for (i, (setting, group)) in Setting::TABLE_ORDER.iter().zip(&groups).enumerate() {
        let n = group.len() as f64;
        let mut mean = [0.0; 3];
        let mut sd = [0.0; 3];
        for d in 0..3 {
            let xs: Vec<f64> = group.iter().map(|t| t.setting(*setting).clicks[d] as f64).collect();
            let m = xs.iter().sum::<f64>() / n;
            mean[d] = m;
            sd[d] = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            totals.clicks[i][d] = xs.iter().sum();
        }
        totals.rounds[i] = group.iter().map(|t| t.setting(*setting).rounds as f64).sum();
        columns.push(Table1Column {
            setting: *setting,
            label: setting.label().to_string(),
            mean,
            sd,
        });
    }
    Ok(Table1Report {
        experiment: ExperimentKind::Table1Repro,
        seed,
        sessions,
        duration_s,
        columns,
        qber: counts_qber(&totals, cfg)?,
    })
}

fn table1_artifact(cfg: &ExperimentConfig) -> Result<Artifact> {
    let report = table1_report(&cfg.apparatus, cfg.table1.sessions, cfg.duration_s, cfg.seed)?;
    let summary = format!(
        "table1: {} sessions per setting, C_D0 {{0,0}} {:.1}, QBER {:.4} (corrected {:.4})",
        report.sessions, report.columns[0].mean[0], report.qber.qber.value, report.qber.qber_corrected.value
    );
    let bytes = match cfg.output.format {
        OutputFormat::Json => to_json(&report)?,
        OutputFormat::Csv => {
            let mut header = vec!["quantity"];
            header.extend(Setting::TABLE_ORDER.iter().map(|s| s.label()));
            let mut rows = Vec::new();
            for (d, name) in ["C_D0", "C_D1", "C_D2"].into_iter().enumerate() {
                let mut row = vec![name.to_string()];
                row.extend(report.columns.iter().map(|c| c.mean[d].to_string()));
                rows.push(row);
            }
            for (d, name) in ["sd_C_D0", "sd_C_D1", "sd_C_D2"].into_iter().enumerate() {
                let mut row = vec![name.to_string()];
                row.extend(report.columns.iter().map(|c| c.sd[d].to_string()));
                rows.push(row);
            }
            for (name, v) in [("QBER", report.qber.qber.value), ("QBER_corrected", report.qber.qber_corrected.value)] {
                rows.push(vec![name.to_string(), v.to_string(), String::new(), String::new(), String::new()]);
            }
            csv_bytes(&header, rows)?
        }
    };
    Ok(Artifact { summary, bytes })
}

/// Runs the configured experiment and serializes its result.
pub fn execute(cfg: &ExperimentConfig) -> Result<Artifact> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::ProtocolSession => session_artifact(cfg),
        ExperimentKind::FringeScan => scan_artifact(cfg),
        ExperimentKind::Stability => stability_artifact(cfg),
        ExperimentKind::SecurityReport => security_artifact(cfg),
        ExperimentKind::Table1Repro => table1_artifact(cfg),
    }
}

/// Replaces `path` with `bytes` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| crate::Error::Io(e.error))?;
    Ok(())
}

/// Runs the experiment and writes the result to the configured path, if
/// any.
pub fn run(cfg: &ExperimentConfig) -> Result<Artifact> {
    let artifact = execute(cfg)?;
    if let Some(path) = &cfg.output.path {
        write_atomic(path, &artifact.bytes)?;
    }
    Ok(artifact)
}
