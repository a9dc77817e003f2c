use std::io::{self, Write};

/// `x` with nine significant digits in scientific notation; the exact text is
/// stable across platforms so outputs can be compared byte for byte.
pub fn format_sig(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Writes a header and rows of pre-formatted cells as comma-separated lines.
pub fn write_csv<W: Write>(out: &mut W, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
