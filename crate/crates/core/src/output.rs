//! Fixed-format CSV output: 12 significant digits, '.' decimal separator,
//! LF line endings, `#` comment lines before the header, empty fields for
//! missing values.

use std::io::Write;

use crate::error::Result;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `%.12g`-style formatting.
pub fn format_sig(x: f64) -> String {
    format_sig_digits(x, SIGNIFICANT_DIGITS)
}

pub fn format_sig_digits(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let digits = digits.max(1);
    // Rounding to `digits` first fixes the exponent, e.g. 9.9999999999999e2 → 1e3.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn format_opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

/// Writes `# comment` lines, a header row and numeric rows.
pub fn write_table<W: Write>(
    out: W,
    comments: &[String],
    headers: &[String],
    rows: impl IntoIterator<Item = Vec<Option<f64>>>,
) -> Result<()> {
    write_text_table(
        out,
        comments,
        headers,
        rows.into_iter().map(|r| r.into_iter().map(format_opt).collect()),
    )
}

/// As [`write_table`] with preformatted fields.
pub fn write_text_table<W: Write>(
    mut out: W,
    comments: &[String],
    headers: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(headers)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (1.0, "1"),
            (0.5, "0.5"),
            (-0.25, "-0.25"),
            (1.0 / 3.0, "0.333333333333"),
            (2.0 / 3.0, "0.666666666667"),
            (123456.789, "123456.789"),
            (1e-5, "1e-05"),
            (1.5e-4, "0.00015"),
            (1e12, "1e+12"),
            (999999999999.9, "1e+12"),
            (123456789012.0, "123456789012"),
            (std::f64::consts::PI, "3.14159265359"),
            (-1.0e-10, "-1e-10"),
        ];
        for (x, expect) in cases {
            assert_eq!(format_sig(x), expect, "{x}");
        }
    }

    #[test]
    fn table_layout() {
        let mut buf = Vec::new();
        write_table(
            &mut buf,
            &["model: s_one".into()],
            &["time_ps".into(), "p".into()],
            vec![vec![Some(0.0), Some(1.0)], vec![Some(0.5), None]],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# model: s_one\ntime_ps,p\n0,1\n0.5,\n");
    }

    #[test]
    fn headers_with_commas_are_quoted() {
        let mut buf = Vec::new();
        write_table(&mut buf, &[], &["|↑⟩|1,0⟩".into()], vec![vec![Some(1.0)]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "\"|↑⟩|1,0⟩\"\n1\n");
    }
}
