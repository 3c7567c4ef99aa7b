//! Artifact writers and the matching CSV reader for Q tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dualpi::dpi::DpiTrace;
use dualpi::perf::TwofoldValues;
use dualpi::{DpiResult, GameSpec, InvariantSet, QTable};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SIG_DIGITS: usize = 12;

/// `printf("%.12g")`: 12 significant digits, trailing zeros trimmed,
/// scientific notation outside `1e-5 <= |v| < 1e12`.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG_DIGITS as i32).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn q_csv<K>(q: &QTable<K>) -> String {
    let mut out = String::from("x,u,a,value\n");
    for x in 0..q.n_states() {
        for u in 0..q.n_u() {
            for a in 0..q.n_a() {
                writeln!(out, "{x},{u},{a},{}", fmt_sig(q.get(x, u, a))).unwrap();
            }
        }
    }
    out
}

/// Reads a table written by [`q_csv`]; every cell must appear exactly once.
pub fn parse_q_csv<K>(text: &str, n_states: usize, n_u: usize, n_a: usize) -> Result<QTable<K>, CliError> {
    let bad = |line: usize, msg: &str| CliError::Schema(format!("line {line}: {msg}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "x,u,a,value" => {}
        _ => return Err(bad(1, "expected header x,u,a,value")),
    }
    let cells = n_states * n_u * n_a;
    let mut values = vec![f64::NAN; cells];
    let mut seen = vec![false; cells];
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(bad(i + 1, "expected 4 fields"));
        }
        let idx = |s: &str, hi: usize| s.parse::<usize>().ok().filter(|&v| v < hi);
        let (Some(x), Some(u), Some(a)) = (idx(fields[0], n_states), idx(fields[1], n_u), idx(fields[2], n_a)) else {
            return Err(bad(i + 1, "index out of range"));
        };
        let v: f64 = fields[3].parse().map_err(|_| bad(i + 1, "value is not a number"))?;
        let c = (x * n_u + u) * n_a + a;
        if seen[c] {
            return Err(bad(i + 1, "duplicate cell"));
        }
        seen[c] = true;
        values[c] = v;
    }
    if seen.iter().any(|&s| !s) {
        return Err(CliError::Schema(format!("table is missing {} cells", seen.iter().filter(|&&s| !s).count())));
    }
    Ok(QTable::from_values(n_states, n_u, n_a, values))
}

pub fn values_csv(spec: &GameSpec, values: &TwofoldValues, inv: &InvariantSet) -> String {
    let mut out = String::from("x,h,v,v_h,objective,member,ambiguous\n");
    for x in 0..spec.n_states {
        writeln!(
            out,
            "{x},{},{},{},{},{},{}",
            fmt_sig(spec.h(x)),
            fmt_sig(values.v[x]),
            fmt_sig(values.v_h[x]),
            fmt_sig(values.objective[x]),
            u8::from(inv.is_member(x)),
            u8::from(inv.is_ambiguous(x)),
        )
        .unwrap();
    }
    out
}

pub fn trace_csv(trace: &DpiTrace) -> String {
    let mut out = String::from(
        "step,safety_delta,safety_error_bound,member_count,feasible,chain_violation,task_delta,task_residual,constrained_residual\n",
    );
    for (k, s) in trace.steps.iter().enumerate() {
        writeln!(
            out,
            "{k},{},{},{},{},{},{},{},{}",
            fmt_sig(s.safety_delta),
            fmt_sig(s.safety_error_bound),
            s.member_count,
            u8::from(s.feasible),
            fmt_sig(s.chain_violation),
            fmt_sig(s.task_delta),
            fmt_sig(s.task_residual),
            fmt_sig(s.constrained_residual),
        )
        .unwrap();
    }
    out
}

/// Binary P5 image: 255 member, 128 boundary-ambiguous, 0 outside.
pub fn pgm(inv: &InvariantSet, width: usize, height: usize) -> Vec<u8> {
    assert_eq!(width * height, inv.n_states(), "image size must match state count");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend((0..inv.n_states()).map(|x| {
        if inv.is_ambiguous(x) {
            128
        } else if inv.is_member(x) {
            255
        } else {
            0
        }
    }));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    /// Task policy rows over protagonist actions.
    pub pi: Vec<Vec<f64>>,
    pub pi_h: Vec<usize>,
    pub members: Vec<usize>,
    pub ambiguous: Vec<usize>,
    pub admissible: Vec<Vec<usize>>,
    pub threshold: f64,
}

impl PolicyFile {
    pub fn from_result(res: &DpiResult) -> Self {
        let n = res.inv.n_states();
        PolicyFile {
            pi: (0..n).map(|x| res.pi.row(x).to_vec()).collect(),
            pi_h: res.pi_h.actions().to_vec(),
            members: res.inv.members().collect(),
            ambiguous: (0..n).filter(|&x| res.inv.is_ambiguous(x)).collect(),
            admissible: (0..n).map(|x| res.inv.admissible(x).to_vec()).collect(),
            threshold: res.inv.threshold(),
        }
    }
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
