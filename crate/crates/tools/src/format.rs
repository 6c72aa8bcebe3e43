//! Number formatting. Human-facing output uses six significant digits;
//! CSV cells use the shortest representation that reads back exactly.

use std::collections::BTreeMap;

/// `%g`-style rendering with six significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        trim_zeros(&format!("{:.*}", (5 - exp) as usize, x)).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Exact round-trip rendering for CSV.
pub fn full(x: f64) -> String {
    format!("{x:e}")
}

pub fn vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| sig6(x)).collect();
    format!("({})", parts.join(", "))
}

/// 1-based index set, as written in the text.
pub fn index_set(v: &[usize]) -> String {
    if v.is_empty() {
        return "∅".into();
    }
    let parts: Vec<String> = v.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

pub fn keyed(m: &BTreeMap<usize, f64>) -> String {
    let parts: Vec<String> = m.iter().map(|(i, v)| format!("{}: {}", i + 1, sig6(*v))).collect();
    format!("{{{}}}", parts.join(", "))
}

/// Comma-separated list of numbers, as given on the command line.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{}` is not a number", t.trim())))
        .collect()
}

/// 1-based pair indices, converted to 0-based.
pub fn parse_indices(s: &str) -> Result<Vec<usize>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(i) if i >= 1 => Ok(i - 1),
            _ => Err(format!("`{}` is not a pair index (1-based)", t.trim())),
        })
        .collect()
}
