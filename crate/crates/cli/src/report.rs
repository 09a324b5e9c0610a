//! Command output: one [`Report`] per run, rendered as JSON, CSV or text.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde_json::{json, Map, Value};

use cmforge::arith::Rational;
use cmforge::gzrhs::PrimeLogSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub params: Map<String, Value>,
    pub result: Value,
    pub warnings: Vec<String>,
    pub text: String,
    pub csv_header: &'static str,
    pub csv_rows: Vec<String>,
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            params: Map::new(),
            result: Value::Null,
            warnings: Vec::new(),
            text: String::new(),
            csv_header: "",
            csv_rows: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn to_json(&self) -> Value {
        json!({
            "command": self.command,
            "params": Value::Object(self.params.clone()),
            "result": self.result,
            "warnings": self.warnings,
        })
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => canonical_json(&self.to_json()),
            Format::Csv => {
                let mut out = String::new();
                out.push_str(self.csv_header);
                out.push('\n');
                for row in &self.csv_rows {
                    out.push_str(row);
                    out.push('\n');
                }
                out
            }
            Format::Text => {
                let mut out = self.text.clone();
                for w in &self.warnings {
                    out.push_str(&format!("warning: {w}\n"));
                }
                out
            }
        }
    }
}

/// Pretty JSON with sorted keys; parsing and re-rendering is the identity.
pub fn canonical_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

const SAFE_INT: u64 = 1 << 53;

/// Integers beyond `2^53` become strings.
pub fn int_value(v: &BigInt) -> Value {
    match v.to_i64() {
        Some(i) if i.unsigned_abs() <= SAFE_INT => json!(i),
        _ => json!(v.to_string()),
    }
}

pub fn rational_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// `{"q": "num/den"}`.
pub fn log_sum_value(s: &PrimeLogSum) -> Value {
    let map: Map<String, Value> = s
        .exponents()
        .iter()
        .map(|(q, e)| (q.to_string(), json!(rational_string(e))))
        .collect();
    Value::Object(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_integers_become_strings() {
        let limit = BigInt::from(SAFE_INT);
        assert_eq!(int_value(&limit), json!(SAFE_INT));
        assert_eq!(int_value(&-&limit), json!(-(SAFE_INT as i64)));
        assert_eq!(int_value(&(&limit + 1)), json!("9007199254740993"));
        assert_eq!(int_value(&BigInt::from(217)), json!(217));
    }

    #[test]
    fn exponents_are_exact_fractions() {
        let mut s = PrimeLogSum::zero();
        s.add_term(7, Rational::new(8, 1));
        s.add_term(2, Rational::new(3, 2));
        assert_eq!(log_sum_value(&s), json!({"2": "3/2", "7": "8/1"}));
    }

    #[test]
    fn canonical_json_is_stable() {
        let mut r = Report::new("demo");
        r.param("z", 1).param("a", "x");
        r.result = json!({"b": [1, 2], "a": {"d": null, "c": "1/3"}});
        r.warnings.push("w".into());
        let text = r.render(Format::Json);
        let parsed: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(canonical_json(&parsed), text);
        assert!(text.find("\"a\"").unwrap() < text.find("\"z\"").unwrap());
    }

    #[test]
    fn text_and_csv_rendering() {
        let mut r = Report::new("demo");
        r.text = "body\n".into();
        r.warnings.push("careful".into());
        r.csv_header = "a,b";
        r.csv_rows = vec!["1,2".into()];
        assert_eq!(r.render(Format::Text), "body\nwarning: careful\n");
        assert_eq!(r.render(Format::Csv), "a,b\n1,2\n");
    }
}
