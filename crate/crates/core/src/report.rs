//! Tabular output: 9-significant-digit number formatting and CSV emission
//! for value tables, grids, game evaluations, and run statistics.

use crate::fd::Grid2D;
use crate::hj::ValueTable;

/// Formats with 9 significant digits, plain notation in a moderate exponent
/// range and scientific outside it.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..9).contains(&exp) {
        format!("{x:.8e}")
    } else {
        let decimals = (8 - exp).max(0) as usize;
        format!("{x:.*}", decimals)
    }
}

fn push_row(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join(","));
    out.push('\n');
}

/// CSV with header `t,x1..xn,value,u1..un,p0_1..p0_m,stop_time`. Failed
/// nodes carry `nan` in the value column and empty optimizer fields.
pub fn value_table_csv(table: &ValueTable) -> String {
    let n = table.state_dim;
    let m = table.adjoint_dim;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("value".into());
    header.extend((1..=n).map(|i| format!("u{i}")));
    header.extend((1..=m).map(|i| format!("p0_{i}")));
    header.push("stop_time".into());
    let mut out = String::new();
    push_row(&mut out, &header);
    for row in &table.rows {
        let mut cells = vec![sig9(table.t0)];
        cells.extend(row.coords.iter().map(|v| sig9(*v)));
        match &row.outcome {
            Ok(v) => {
                cells.push(sig9(v.value));
                cells.extend(v.control.iter().map(|u| sig9(*u)));
                cells.extend(v.p0.iter().map(|p| sig9(*p)));
                cells.push(v.stop_time.map(sig9).unwrap_or_default());
            }
            Err(_) => {
                cells.push("nan".into());
                cells.extend(std::iter::repeat_n(String::new(), n + m + 1));
            }
        }
        push_row(&mut out, &cells);
    }
    out
}

/// CSV with header `x1,x2,value`, row-major in the first coordinate.
pub fn grid2d_csv(grid: &Grid2D) -> String {
    let mut out = String::from("x1,x2,value\n");
    let (n1, n2) = grid.counts();
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let (x1, x2) = grid.node(i1, i2);
            push_row(
                &mut out,
                &[sig9(x1), sig9(x2), sig9(grid.value(i1, i2))],
            );
        }
    }
    out
}

/// Parses a `x1,x2,value` CSV back into the triples it lists.
pub fn parse_grid2d_csv(text: &str) -> crate::Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if k == 0 || line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 3 {
            return Err(crate::Error::InvalidConfig(format!(
                "grid CSV line {} needs 3 cells",
                k + 1
            )));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| crate::Error::InvalidConfig(format!("bad number {s:?}: {e}")))
        };
        rows.push((parse(cells[0])?, parse(cells[1])?, parse(cells[2])?));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_formats() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0), "1.00000000");
        assert_eq!(sig9(0.0307), "0.0307000000");
        assert_eq!(sig9(-2.5e-7), "-2.50000000e-7");
        assert_eq!(sig9(123456789.0), "123456789");
        assert_eq!(sig9(1.23456789e12), "1.23456789e12");
    }
}
