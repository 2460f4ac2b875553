//! Plain-text table rendering shared by the benchmark reports.

/// Tab-separated rows, one line each, trailing newline.
pub fn tsv(rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&r.join("\t"));
        out.push('\n');
    }
    out
}

/// Left-aligned first column, right-aligned numeric columns, a rule under
/// the header rows.
pub fn aligned(header_rows: &[Vec<String>], body: &[Vec<String>]) -> String {
    let ncols = header_rows.iter().chain(body).map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; ncols];
    for r in header_rows.iter().chain(body) {
        for (i, c) in r.iter().enumerate() {
            widths[i] = widths[i].max(c.chars().count());
        }
    }
    let line = |r: &Vec<String>| -> String {
        let mut s = String::new();
        for (i, w) in widths.iter().enumerate() {
            let c = r.get(i).map(String::as_str).unwrap_or("");
            let pad = w - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = String::new();
    for h in header_rows {
        out.push_str(&line(h));
    }
    let total = widths.iter().sum::<usize>() + 2 * ncols.saturating_sub(1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in body {
        out.push_str(&line(r));
    }
    out
}

pub fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}
