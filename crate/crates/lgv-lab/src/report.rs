//! CSV and JSON artifact writers.
//!
//! Every artifact starts with a `# config_hash=... seeds=...` comment line
//! so any output can be traced back to the exact configuration that
//! produced it; identical config + seeds reproduce identical bytes.

use std::fs;
use std::path::Path;

use lgv_core::attack::{TransferReport, TransferRow, TransferSummary};
use lgv_core::geometry::PlaneMap;
use lgv_core::surrogate::SubspaceBasis;
use lgv_core::train::EpochStat;
use serde::Serialize;

use crate::error::{LabError, Result};

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct ReportMeta {
    pub config_hash: String,
    pub seeds: Vec<u64>,
}

impl ReportMeta {
    fn comment_line(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        format!("# config_hash={} seeds={}\n", self.config_hash, seeds.join("|"))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| LabError::io(path, e))
}

/// Quote a CSV field when it contains separators.
fn field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_transfer_csv(path: &Path, meta: &ReportMeta, rows: &[TransferRow]) -> Result<()> {
    let mut out = meta.comment_line();
    out.push_str("surrogate,target,norm,eps,seed,success_rate,n\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            field(&r.surrogate),
            field(&r.target),
            r.norm,
            r.epsilon,
            r.seed,
            r.success_rate,
            r.n_examples
        ));
    }
    write_file(path, &out)
}

pub fn write_transfer_summary_csv(
    path: &Path,
    meta: &ReportMeta,
    summary: &[TransferSummary],
) -> Result<()> {
    let mut out = meta.comment_line();
    out.push_str("surrogate,target,norm,eps,mean,sd,n_seeds\n");
    for s in summary {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            field(&s.surrogate),
            field(&s.target),
            s.norm,
            s.epsilon,
            s.mean,
            s.sd,
            s.n_seeds
        ));
    }
    write_file(path, &out)
}

#[derive(Serialize)]
struct TransferJson<'a> {
    config_hash: &'a str,
    seeds: &'a [u64],
    rows: Vec<serde_json::Value>,
    summary: Vec<serde_json::Value>,
}

pub fn write_transfer_json(path: &Path, meta: &ReportMeta, report: &TransferReport) -> Result<()> {
    let rows = report
        .rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "surrogate": r.surrogate,
                "target": r.target,
                "norm": r.norm.to_string(),
                "eps": r.epsilon,
                "seed": r.seed,
                "success_rate": r.success_rate,
                "n": r.n_examples,
            })
        })
        .collect();
    let summary = report
        .summary
        .iter()
        .map(|s| {
            serde_json::json!({
                "surrogate": s.surrogate,
                "target": s.target,
                "norm": s.norm.to_string(),
                "eps": s.epsilon,
                "mean": s.mean,
                "sd": s.sd,
                "n_seeds": s.n_seeds,
            })
        })
        .collect();
    let doc = TransferJson {
        config_hash: &meta.config_hash,
        seeds: &meta.seeds,
        rows,
        summary,
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| LabError::config(format!("report serialisation failed: {e}")))?;
    write_file(path, &json)
}

pub fn write_training_log(path: &Path, meta: &ReportMeta, log: &[EpochStat]) -> Result<()> {
    let mut out = meta.comment_line();
    out.push_str("epoch,train_loss,val_accuracy\n");
    for stat in log {
        out.push_str(&format!(
            "{},{},{}\n",
            stat.epoch, stat.train_loss, stat.val_accuracy
        ));
    }
    write_file(path, &out)
}

/// FNV-1a over the bit patterns; identifies a direction vector in ray
/// artifacts.
pub fn direction_hash(values: &[f64]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// One evaluated point of a ray probe.
pub struct RayRow {
    pub origin: String,
    pub direction_seed: u64,
    pub direction_hash: String,
    pub alpha: f64,
    pub natural_loss: f64,
    pub adversarial_loss: Option<f64>,
}

pub fn write_rays_csv(path: &Path, meta: &ReportMeta, rows: &[RayRow]) -> Result<()> {
    let mut out = meta.comment_line();
    out.push_str("origin,direction_seed,direction_hash,alpha,natural_loss,adversarial_loss\n");
    for r in rows {
        let adv = r
            .adversarial_loss
            .map(|v| v.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            field(&r.origin),
            r.direction_seed,
            r.direction_hash,
            r.alpha,
            r.natural_loss,
            adv
        ));
    }
    write_file(path, &out)
}

/// One evaluated point of the interpolation path, with per-target
/// adversarial losses.
pub struct InterpRow {
    pub alpha: f64,
    pub natural_loss: f64,
    pub target_losses: Vec<f64>,
}

pub fn write_interp_csv(
    path: &Path,
    meta: &ReportMeta,
    target_names: &[String],
    rows: &[InterpRow],
) -> Result<()> {
    let mut out = meta.comment_line();
    out.push_str("alpha,natural_loss");
    for name in target_names {
        out.push_str(&format!(",adv_loss_{}", field(name)));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{}", r.alpha, r.natural_loss));
        for v in &r.target_losses {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub struct HessianRow {
    pub model: String,
    pub member: Option<usize>,
    pub max_eigenvalue: f64,
    pub power_iterations: usize,
    pub trace: f64,
}

pub fn write_hessian_csv(path: &Path, meta: &ReportMeta, rows: &[HessianRow]) -> Result<()> {
    let mut out = meta.comment_line();
    out.push_str("model,member,max_eigenvalue,power_iterations,trace\n");
    for r in rows {
        let member = r.member.map(|m| m.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            field(&r.model),
            member,
            r.max_eigenvalue,
            r.power_iterations,
            r.trace
        ));
    }
    write_file(path, &out)
}

pub fn write_disk_csv(path: &Path, meta: &ReportMeta, map: &PlaneMap) -> Result<()> {
    let mut out = meta.comment_line();
    out.push_str("a,b,loss,in_disk\n");
    for (i, &a) in map.coords.iter().enumerate() {
        for (j, &b) in map.coords.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                a,
                b,
                map.losses.get(i, j),
                map.in_disk(i, j) as u8
            ));
        }
    }
    write_file(path, &out)
}

pub fn write_pca_csv(path: &Path, meta: &ReportMeta, basis: &SubspaceBasis) -> Result<()> {
    let mut out = meta.comment_line();
    out.push_str("component,singular_value,explained_ratio,cumulative_ratio\n");
    let mut cumulative = 0.0;
    for (i, (s, r)) in basis
        .singular_values()
        .iter()
        .zip(basis.explained_ratio())
        .enumerate()
    {
        cumulative += r;
        out.push_str(&format!("{i},{s},{r},{cumulative}\n"));
    }
    write_file(path, &out)
}

pub struct SweepRow {
    pub value: f64,
    pub target: String,
    pub seed: u64,
    pub success_rate: f64,
    pub n_examples: usize,
}

pub struct SweepSummaryRow {
    pub value: f64,
    pub target: String,
    pub mean: f64,
    pub sd: f64,
}

pub fn write_sweep_csv(
    path: &Path,
    meta: &ReportMeta,
    param: &str,
    rows: &[SweepRow],
) -> Result<()> {
    let mut out = meta.comment_line();
    out.push_str("param,value,target,seed,success_rate,n\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            param,
            r.value,
            field(&r.target),
            r.seed,
            r.success_rate,
            r.n_examples
        ));
    }
    write_file(path, &out)
}

pub fn write_sweep_summary_csv(
    path: &Path,
    meta: &ReportMeta,
    param: &str,
    rows: &[SweepSummaryRow],
) -> Result<()> {
    let mut out = meta.comment_line();
    out.push_str("param,value,target,mean,sd\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            param,
            r.value,
            field(&r.target),
            r.mean,
            r.sd
        ));
    }
    write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lgv_core::attack::Norm;

    #[test]
    fn transfer_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reports/transfer.csv");
        let meta = ReportMeta {
            config_hash: "aabbccdd".into(),
            seeds: vec![1, 2],
        };
        let rows = vec![TransferRow {
            surrogate: "lgv".into(),
            target: "target_00".into(),
            norm: Norm::LInf,
            epsilon: 0.1,
            seed: 1,
            success_rate: 0.5,
            n_examples: 200,
        }];
        write_transfer_csv(&path, &meta, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# config_hash=aabbccdd seeds=1|2");
        assert_eq!(lines.next().unwrap(), "surrogate,target,norm,eps,seed,success_rate,n");
        assert_eq!(lines.next().unwrap(), "lgv,target_00,linf,0.1,1,0.5,200");
    }

    #[test]
    fn fields_with_commas_are_quoted() {
        assert_eq!(field("a,b"), "\"a,b\"");
        assert_eq!(field("plain"), "plain");
    }

    #[test]
    fn direction_hash_is_stable() {
        let v = vec![0.25, -1.5, 3.0];
        assert_eq!(direction_hash(&v), direction_hash(&v.clone()));
        assert_ne!(direction_hash(&v), direction_hash(&[0.25, -1.5, 3.1]));
    }
}
