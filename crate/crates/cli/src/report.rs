//! Consolidated report of a finished run directory.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;
use crate::run::{sha256_hex, MANIFEST};

#[derive(Debug, Serialize)]
pub struct DigestCheck {
    pub file: String,
    pub ok: bool,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub scenario: String,
    pub mode: String,
    pub outcome: Value,
    pub warnings: Value,
    pub informativity: Option<Value>,
    pub lmi: Option<Value>,
    pub certificate: Option<Value>,
    pub index_estimate: Option<Value>,
    pub digests: Vec<DigestCheck>,
}

impl Report {
    pub fn digests_ok(&self) -> bool {
        self.digests.iter().all(|d| d.ok)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("scenario: {}\nmode: {}\n", self.scenario, self.mode);
        s.push_str(&format!(
            "outcome: {} (exit {})\n",
            self.outcome["status"].as_str().unwrap_or("?"),
            self.outcome["exit_code"]
        ));
        if let Some(m) = self.outcome["message"].as_str() {
            s.push_str(&format!("message: {m}\n"));
        }
        if let Some(w) = self.warnings.as_array() {
            for x in w {
                s.push_str(&format!("warning: {}\n", x.as_str().unwrap_or("")));
            }
        }
        if let Some(inf) = &self.informativity {
            s.push_str(&format!(
                "\ninformativity: rank {} of {} with N = {} ({})\n",
                inf["rank"], inf["required"], inf["n_samples"],
                if inf["informative"].as_bool() == Some(true) { "informative" } else { "not informative" }
            ));
        }
        if let Some(l) = &self.lmi {
            s.push_str(&format!(
                "lmi: {} (epsilon {}, min eig P {}, residual {})\n",
                l["verdict"].as_str().unwrap_or("?"),
                l["epsilon"],
                l["min_eig_p"],
                l["equality_residual"]
            ));
        }
        if let Some(c) = &self.certificate {
            s.push_str(&format!(
                "certificate: {} (worst real part {})\n",
                if c["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" },
                c["worst_real_part"]
            ));
            if let Some(spec) = c["spectrum"].as_array() {
                s.push_str("closed-loop eigenvalues:\n");
                for z in spec {
                    let re = z[0].as_f64().unwrap_or(f64::NAN);
                    let im = z[1].as_f64().unwrap_or(f64::NAN);
                    s.push_str(&format!("  {re:+.6e} {im:+.6e}i\n"));
                }
            }
            if let Some(r) = c.get("regulation").filter(|r| !r.is_null()) {
                s.push_str(&format!(
                    "regulation: ratio {} vs rho {} at T = {} ({})\n",
                    r["ratio"],
                    r["rho"],
                    r["horizon"],
                    if r["pass"].as_bool() == Some(true) { "pass" } else { "fail" }
                ));
            }
        }
        if let Some(e) = &self.index_estimate {
            s.push_str(&format!("\nindex estimate: nu_hat = {} ({})\n", e["nu_hat"], e["verdict"].as_str().unwrap_or("?")));
        }
        s.push_str("\nartifacts:\n");
        for d in &self.digests {
            s.push_str(&format!("  {} {}\n", if d.ok { "ok      " } else { "MODIFIED" }, d.file));
        }
        s
    }
}

fn read_json(dir: &Path, name: &str) -> Result<Option<Value>, CliError> {
    let p = dir.join(name);
    if !p.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&p)?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
}

/// Builds the report from the run directory without writing anything.
pub fn build_report(dir: &Path) -> Result<Report, CliError> {
    let manifest = read_json(dir, MANIFEST)?
        .ok_or_else(|| CliError::Config(format!("{} has no {MANIFEST}", dir.display())))?;
    let mut digests = Vec::new();
    for a in manifest["artifacts"].as_array().into_iter().flatten() {
        let file = a["file"].as_str().unwrap_or_default().to_string();
        let ok = match std::fs::read(dir.join(&file)) {
            Ok(bytes) => a["sha256"].as_str() == Some(sha256_hex(&bytes).as_str()),
            Err(_) => false,
        };
        digests.push(DigestCheck { file, ok });
    }
    Ok(Report {
        scenario: manifest["scenario"].as_str().unwrap_or_default().to_string(),
        mode: manifest["mode"].as_str().unwrap_or_default().to_string(),
        outcome: manifest["outcome"].clone(),
        warnings: manifest["warnings"].clone(),
        informativity: read_json(dir, "informativity.json")?,
        lmi: read_json(dir, "lmi.json")?,
        certificate: read_json(dir, "certificate.json")?,
        index_estimate: read_json(dir, "index_estimate.json")?,
        digests,
    })
}

/// Writes `report.txt` and `report.json` into the run directory. Fails when
/// an artifact no longer matches its recorded digest.
pub fn export_report(dir: &Path) -> Result<Report, CliError> {
    let report = build_report(dir)?;
    std::fs::write(dir.join("report.txt"), report.to_text())?;
    let mut js = serde_json::to_string_pretty(&report).map_err(|e| CliError::Other(e.to_string()))?;
    js.push('\n');
    std::fs::write(dir.join("report.json"), js)?;
    if !report.digests_ok() {
        let bad: Vec<&str> = report.digests.iter().filter(|d| !d.ok).map(|d| d.file.as_str()).collect();
        return Err(CliError::Other(format!("artifacts changed since the run: {}", bad.join(", "))));
    }
    Ok(report)
}
