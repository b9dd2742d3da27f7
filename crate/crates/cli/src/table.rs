use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(usize),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Int(v) => write!(out, "{v}").unwrap(),
            // `{:e}` is the shortest representation that round-trips.
            Cell::Float(v) => write!(out, "{v:e}").unwrap(),
            Cell::Text(s) if s.contains([',', '"', '\n', '\r']) => {
                write!(out, "\"{}\"", s.replace('"', "\"\"")).unwrap()
            }
            Cell::Text(s) => out.push_str(s),
        }
    }
}

/// CSV table with a fixed header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.render(&mut out);
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_header_and_rows() {
        let mut t = Table::new(&["n", "x", "label"]);
        t.push(vec![Cell::Int(4), Cell::Float(0.1), Cell::Text("drift".into())]);
        t.push(vec![Cell::Int(8), Cell::Float(-2.5e-17), Cell::Text("a,\"b\"".into())]);
        assert_eq!(t.to_csv(), "n,x,label\n4,1e-1,drift\n8,-2.5e-17,\"a,\"\"b\"\"\"\n");
    }

    #[test]
    fn floats_round_trip() {
        for v in [std::f64::consts::PI, 1.0 / 3.0, 6.02214076e23, 5e-324] {
            let mut s = String::new();
            Cell::Float(v).render(&mut s);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
