use aam_core::analysis::BoundsRecord;
use aam_core::anderson::{Sigma, Trace};
use aam_core::experiments::format_float;

fn opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// Per-iteration trace. Bound columns are filled from the record with the
/// same `k` and left empty otherwise.
pub fn trace(t: &Trace, bounds: Option<&[BoundsRecord]>) -> String {
    let mut header = vec!["k".to_string(), "r_norm".into(), "y_k".into(), "phi_k".into(), "sigma_k".into()];
    header.extend((1..=t.m).map(|i| format!("beta_{i}")));
    header.extend(["B", "lower", "upper", "actual"].map(String::from));
    let mut out = header.join(",");
    out.push('\n');
    for rec in &t.records {
        let mut cells = vec![
            rec.k.to_string(),
            format_float(rec.r_norm),
            opt(rec.y),
            opt(rec.phi),
            match rec.sigma {
                Some(Sigma::Value(s)) => format_float(s),
                Some(Sigma::Floor) => "floor".into(),
                None => String::new(),
            },
        ];
        cells.extend((0..t.m).map(|i| opt(rec.beta.get(i).copied())));
        match bounds.and_then(|b| b.iter().find(|b| b.k == rec.k)) {
            Some(b) => cells.extend([opt(b.b_value), format_float(b.lower), format_float(b.upper), format_float(b.actual)]),
            None => cells.extend(std::iter::repeat_n(String::new(), 4)),
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

// Index and flag columns print as integers.
const INTEGER_COLUMNS: [&str; 4] = ["k", "j", "special_case", "violation"];

pub fn table(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .zip(columns)
            .map(|(v, c)| {
                if INTEGER_COLUMNS.contains(c) {
                    format!("{}", *v as i64)
                } else {
                    format_float(*v)
                }
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
