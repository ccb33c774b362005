//! Trajectory CSV emission with a fixed schema:
//! `iter,loss,grad_norm,alpha,dist_to_teacher`, absent fields left empty.
//! Floats are printed in Rust's shortest round-trip form, so re-parsing an
//! emitted file reproduces the values bit for bit.

use convsep_core::TrajectoryRecord;
use std::io::Write;
use std::path::Path;

pub const HEADER: &str = "iter,loss,grad_norm,alpha,dist_to_teacher";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn emit_csv(records: &[TrajectoryRecord], path: &Path) -> anyhow::Result<()> {
    let mut out = String::with_capacity(records.len() * 48 + HEADER.len() + 1);
    out.push_str(HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iter,
            r.loss,
            r.grad_norm,
            fmt_opt(r.alpha),
            r.dist_to_teacher
        ));
    }
    write_file(path, out.as_bytes())
}

/// Loss-only curves (the net experiment): every other column left empty.
pub fn emit_loss_csv(losses: &[f64], path: &Path) -> anyhow::Result<()> {
    let mut out = String::with_capacity(losses.len() * 24 + HEADER.len() + 1);
    out.push_str(HEADER);
    out.push('\n');
    for (t, loss) in losses.iter().enumerate() {
        out.push_str(&format!("{t},{loss},,,\n"));
    }
    write_file(path, out.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| anyhow::anyhow!("cannot create {}: {e}", path.display()))?;
    f.write_all(bytes)
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    Ok(())
}

/// One re-parsed trajectory row; the optional columns mirror the schema.
#[cfg(test)]
pub struct ParsedRow {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: Option<f64>,
    pub alpha: Option<f64>,
    pub dist_to_teacher: Option<f64>,
}

/// Parse an emitted trajectory file back; used by the round-trip tests.
#[cfg(test)]
pub fn parse_csv(text: &str) -> anyhow::Result<Vec<ParsedRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| anyhow::anyhow!("empty csv"))?;
    anyhow::ensure!(header == HEADER, "unexpected header {header:?}");
    let mut rows = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        anyhow::ensure!(fields.len() == 5, "bad row {line:?}");
        let opt = |s: &str| -> anyhow::Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some(s.parse::<f64>()?))
            }
        };
        rows.push(ParsedRow {
            iter: fields[0].parse()?,
            loss: fields[1].parse()?,
            grad_norm: opt(fields[2])?,
            alpha: opt(fields[3])?,
            dist_to_teacher: opt(fields[4])?,
        });
    }
    Ok(rows)
}
