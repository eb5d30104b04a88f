//! Deterministic number and trajectory formatting. Golden tests diff these
//! bytes, so every path through here must be a pure function of the input
//! values — no locale, no platform variance, LF endings only.

use fraclin::series::FracPowerSeries;

/// 9 significant digits; scientific notation once |x| ≥ 1e6.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let e = x.abs().log10().floor() as i32;
    if e >= 6 {
        format!("{x:.8e}")
    } else {
        let decimals = (8 - e).max(0) as usize;
        format!("{x:.decimals$}")
    }
}

/// One trajectory row: time plus the state components.
pub struct Row {
    pub t: f64,
    pub values: Vec<f64>,
}

/// Leading-power information emitted instead of the (infinite) value at t0.
pub struct OriginRow {
    pub t0: f64,
    /// x(t) ≈ g·(t − t0)^p near t0.
    pub exponent_p: f64,
    pub regular_factor: Vec<f64>,
}

pub fn trajectory_csv(dim: usize, origin: Option<&OriginRow>, rows: &[Row]) -> String {
    let mut out = String::new();
    if let Some(o) = origin {
        out.push_str(&format!(
            "# t0 row lists the regular factor g of x(t) ~ g*(t - t0)^p near t0, p = {}\n",
            format_sig9(o.exponent_p)
        ));
    }
    out.push_str("t");
    for i in 1..=dim {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    if let Some(o) = origin {
        out.push_str(&format_sig9(o.t0));
        for v in &o.regular_factor {
            out.push(',');
            out.push_str(&format_sig9(*v));
        }
        out.push('\n');
    }
    for row in rows {
        out.push_str(&format_sig9(row.t));
        for v in &row.values {
            out.push(',');
            out.push_str(&format_sig9(*v));
        }
        out.push('\n');
    }
    out
}

/// Human-readable series text, one component per line:
/// `x1(t) = c · (t - t0)^p + …` with terms in increasing-power order.
pub fn closed_form_text(series: &FracPowerSeries, t0: f64) -> String {
    let mut out = String::new();
    for row in 0..series.rows() {
        let mut parts = Vec::new();
        for term in series.terms() {
            let c = term.coeff[(row, 0)];
            if c == 0.0 {
                continue;
            }
            parts.push(format!(
                "{} · (t - {t0})^{}",
                format_sig9(c),
                format_sig9(term.exponent - 1.0)
            ));
        }
        let body = if parts.is_empty() { "0".to_string() } else { parts.join(" + ") };
        out.push_str(&format!("x{}(t) = {body}\n", row + 1));
    }
    out
}
