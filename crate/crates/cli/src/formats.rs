//! File formats.
//!
//! CSV schemas (UTF-8, LF, decimal point, header required, byte-exact):
//!
//! * probability table: `state,t,pi,probability`
//! * photon counts:     `state,t,pi,counts`
//! * background rates:  `t,pi,rate_hz`
//! * per-slot spreads:  `state,t,pi,std`
//!
//! `state` is 1-based, `t` is the 0-based time bin, `pi` is `H` or `V`.
//! Reals are written with 17 significant digits (`{:.16e}`), which
//! round-trips every finite f64 bit-exactly. JSON reports go through
//! serde_json, whose shortest-round-trip float encoding is also exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use qsd_core::discrimination::PosteriorTable;
use qsd_core::receiver::{Polarization, ProbabilityTable};

/// 17-significant-digit scientific notation; parses back to the same bits.
pub fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn pol_name(pi: Polarization) -> &'static str {
    match pi {
        Polarization::H => "H",
        Polarization::V => "V",
    }
}

fn parse_pol(s: &str) -> Option<Polarization> {
    match s {
        "H" => Some(Polarization::H),
        "V" => Some(Polarization::V),
        _ => None,
    }
}

/// Render a probability table as CSV.
pub fn probability_table_to_csv(table: &ProbabilityTable) -> String {
    let mut out = String::from("state,t,pi,probability\n");
    for s in 0..table.n_states() {
        for t in 0..table.n_bins() {
            for pi in Polarization::BOTH {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    s + 1,
                    t,
                    pol_name(pi),
                    g17(table.get(s, t, pi))
                ));
            }
        }
    }
    out
}

/// Parse a probability-table CSV produced by [`probability_table_to_csv`].
/// Dimensions are inferred; every `(state, t, pi)` cell must appear exactly
/// once. The per-state undetected mass is recomputed as `1 - sum`.
pub fn probability_table_from_csv(text: &str) -> Result<ProbabilityTable, FormatError> {
    let mut rows = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "state,t,pi,probability")) => {}
        _ => return Err(FormatError::Header("state,t,pi,probability")),
    }
    let mut max_state = 0usize;
    let mut max_bin = 0usize;
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(FormatError::Row(lineno + 1, "expected 4 fields".into()));
        }
        let state: usize = f[0]
            .parse()
            .map_err(|_| FormatError::Row(lineno + 1, format!("bad state {:?}", f[0])))?;
        let t: usize = f[1]
            .parse()
            .map_err(|_| FormatError::Row(lineno + 1, format!("bad bin {:?}", f[1])))?;
        let pi = parse_pol(f[2])
            .ok_or_else(|| FormatError::Row(lineno + 1, format!("bad pi {:?}", f[2])))?;
        let p: f64 = f[3]
            .parse()
            .map_err(|_| FormatError::Row(lineno + 1, format!("bad probability {:?}", f[3])))?;
        if state == 0 {
            return Err(FormatError::Row(lineno + 1, "state must be 1-based".into()));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(FormatError::Row(lineno + 1, format!("probability {p} out of range")));
        }
        max_state = max_state.max(state);
        max_bin = max_bin.max(t + 1);
        rows.push((state - 1, t, pi, p));
    }
    if rows.is_empty() {
        return Err(FormatError::Empty);
    }
    let mut table = ProbabilityTable::zeros(max_state, max_bin);
    let mut seen = vec![false; max_state * max_bin * 2];
    for (s, t, pi, p) in rows {
        let k = (s * max_bin + t) * 2 + pi.index();
        if seen[k] {
            return Err(FormatError::Cell(s + 1, t, pol_name(pi), "duplicate"));
        }
        seen[k] = true;
        table.set(s, t, pi, p);
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        let s = k / (max_bin * 2);
        let t = (k / 2) % max_bin;
        let pi = if k % 2 == 0 { Polarization::H } else { Polarization::V };
        return Err(FormatError::Cell(s + 1, t, pol_name(pi), "missing"));
    }
    for s in 0..max_state {
        table.set_undetected(s, (1.0 - table.detected(s)).max(0.0));
    }
    Ok(table)
}

/// One probability row in JSON table dumps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbRow {
    pub state: usize,
    pub t: usize,
    pub pi: String,
    pub p: f64,
}

/// Lossless JSON image of a probability table plus the priors it was
/// produced under.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableDto {
    pub n_states: usize,
    pub n_bins: usize,
    pub priors: Vec<f64>,
    pub rows: Vec<ProbRow>,
    pub undetected: Vec<f64>,
}

impl TableDto {
    pub fn from_table(table: &ProbabilityTable, priors: &[f64]) -> Self {
        let mut rows = Vec::new();
        for s in 0..table.n_states() {
            for t in 0..table.n_bins() {
                for pi in Polarization::BOTH {
                    rows.push(ProbRow {
                        state: s + 1,
                        t,
                        pi: pol_name(pi).to_string(),
                        p: table.get(s, t, pi),
                    });
                }
            }
        }
        Self {
            n_states: table.n_states(),
            n_bins: table.n_bins(),
            priors: priors.to_vec(),
            rows,
            undetected: (0..table.n_states()).map(|s| table.undetected(s)).collect(),
        }
    }

    pub fn to_table(&self) -> Result<ProbabilityTable, FormatError> {
        let mut table = ProbabilityTable::zeros(self.n_states, self.n_bins);
        for r in &self.rows {
            let pi = parse_pol(&r.pi).ok_or(FormatError::Header("pi must be H or V"))?;
            if r.state == 0 || r.state > self.n_states || r.t >= self.n_bins {
                return Err(FormatError::Header("row index out of range"));
            }
            table.set(r.state - 1, r.t, pi, r.p);
        }
        for (s, u) in self.undetected.iter().enumerate() {
            table.set_undetected(s, *u);
        }
        Ok(table)
    }
}

/// One posterior slot in JSON dumps: evidence plus per-state posteriors
/// (and optionally their one-sigma errors).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorRow {
    pub t: usize,
    pub pi: String,
    pub evidence: f64,
    pub q: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
}

pub fn posterior_rows(post: &PosteriorTable, sigma: Option<&[f64]>) -> Vec<PosteriorRow> {
    let n = post.n_states();
    let mut rows = Vec::new();
    for t in 0..post.n_bins() {
        for pi in Polarization::BOTH {
            let q = (0..n)
                .map(|s| post.posterior(t, pi, s).unwrap_or(0.0))
                .collect();
            let sig = sigma.map(|sig| {
                (0..n)
                    .map(|s| sig[(t * 2 + pi.index()) * n + s])
                    .collect::<Vec<f64>>()
            });
            rows.push(PosteriorRow {
                t,
                pi: pol_name(pi).to_string(),
                evidence: post.evidence(t, pi),
                q,
                sigma: sig,
            });
        }
    }
    rows
}

/// Write counts as CSV (`state,t,pi,counts`); counts are whole numbers.
pub fn counts_to_csv(counts: &crate::pipeline::CountTable) -> String {
    let mut out = String::from("state,t,pi,counts\n");
    for s in 0..counts.n_states {
        for t in 0..counts.n_bins {
            for pi in Polarization::BOTH {
                let c = counts.get(s, t, pi);
                if c == c.trunc() {
                    out.push_str(&format!("{},{},{},{}\n", s + 1, t, pol_name(pi), c as u64));
                } else {
                    out.push_str(&format!("{},{},{},{}\n", s + 1, t, pol_name(pi), g17(c)));
                }
            }
        }
    }
    out
}

/// Strict counts CSV parser: 8 states x 8 bins x 2 outcomes, every cell
/// exactly once, non-negative integer counts.
pub fn counts_from_csv(
    text: &str,
    n_states: usize,
    n_bins: usize,
) -> Result<Vec<f64>, FormatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "state,t,pi,counts")) => {}
        _ => return Err(FormatError::Header("state,t,pi,counts")),
    }
    let mut cells = vec![0.0; n_states * n_bins * 2];
    let mut seen = vec![false; n_states * n_bins * 2];
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(FormatError::Row(lineno + 1, "expected 4 fields".into()));
        }
        let state: usize = f[0]
            .parse()
            .map_err(|_| FormatError::Row(lineno + 1, format!("bad state {:?}", f[0])))?;
        let t: usize = f[1]
            .parse()
            .map_err(|_| FormatError::Row(lineno + 1, format!("bad bin {:?}", f[1])))?;
        let pi = parse_pol(f[2])
            .ok_or_else(|| FormatError::Row(lineno + 1, format!("bad pi {:?}", f[2])))?;
        let count: i64 = f[3]
            .parse()
            .map_err(|_| FormatError::Row(lineno + 1, format!("bad counts {:?}", f[3])))?;
        if count < 0 {
            return Err(FormatError::Row(lineno + 1, format!("negative counts {count}")));
        }
        if !(1..=n_states).contains(&state) || t >= n_bins {
            return Err(FormatError::Row(
                lineno + 1,
                format!("cell (state {state}, t {t}) outside the {n_states}x{n_bins} layout"),
            ));
        }
        let k = ((state - 1) * n_bins + t) * 2 + pi.index();
        if seen[k] {
            return Err(FormatError::Cell(state, t, pol_name(pi), "duplicate"));
        }
        seen[k] = true;
        cells[k] = count as f64;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        let s = k / (n_bins * 2);
        let t = (k / 2) % n_bins;
        let pi = if k % 2 == 0 { Polarization::H } else { Polarization::V };
        return Err(FormatError::Cell(s + 1, t, pol_name(pi), "missing"));
    }
    Ok(cells)
}

/// Background-rate CSV parser (`t,pi,rate_hz`); missing slots default to
/// zero rate, listed slots must be unique.
pub fn background_from_csv(text: &str, n_bins: usize) -> Result<Vec<f64>, FormatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "t,pi,rate_hz")) => {}
        _ => return Err(FormatError::Header("t,pi,rate_hz")),
    }
    let mut rates = vec![0.0; n_bins * 2];
    let mut seen = vec![false; n_bins * 2];
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(FormatError::Row(lineno + 1, "expected 3 fields".into()));
        }
        let t: usize = f[0]
            .parse()
            .map_err(|_| FormatError::Row(lineno + 1, format!("bad bin {:?}", f[0])))?;
        let pi = parse_pol(f[1])
            .ok_or_else(|| FormatError::Row(lineno + 1, format!("bad pi {:?}", f[1])))?;
        let rate: f64 = f[2]
            .parse()
            .map_err(|_| FormatError::Row(lineno + 1, format!("bad rate {:?}", f[2])))?;
        if rate < 0.0 || !rate.is_finite() {
            return Err(FormatError::Row(lineno + 1, format!("invalid rate {rate}")));
        }
        if t >= n_bins {
            return Err(FormatError::Row(lineno + 1, format!("bin {t} out of range")));
        }
        let k = t * 2 + pi.index();
        if seen[k] {
            return Err(FormatError::Cell(0, t, pol_name(pi), "duplicate"));
        }
        seen[k] = true;
        rates[k] = rate;
    }
    Ok(rates)
}

pub fn background_to_csv(rates: &[f64], n_bins: usize) -> String {
    let mut out = String::from("t,pi,rate_hz\n");
    for t in 0..n_bins {
        for pi in Polarization::BOTH {
            out.push_str(&format!(
                "{},{},{}\n",
                t,
                pol_name(pi),
                g17(rates[t * 2 + pi.index()])
            ));
        }
    }
    out
}

/// Per-slot standard deviations as CSV, aligned with the probability schema.
pub fn per_bin_std_to_csv(report: &qsd_core::montecarlo::MCReport) -> String {
    let mut out = String::from("state,t,pi,std\n");
    for s in 0..report.n_states {
        for t in 0..report.n_bins {
            for pi in Polarization::BOTH {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    s + 1,
                    t,
                    pol_name(pi),
                    g17(report.per_bin_std_at(s, t, pi))
                ));
            }
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("missing or malformed header; expected {0:?}")]
    Header(&'static str),
    #[error("line {0}: {1}")]
    Row(usize, String),
    #[error("cell (state {0}, t {1}, pi {2}) {3}")]
    Cell(usize, usize, &'static str, &'static str),
    #[error("file contains no data rows")]
    Empty,
}
