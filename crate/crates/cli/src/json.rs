//! Deterministic JSON rendering: keys sorted, every float written with 17
//! significant digits, so identical results serialize to identical bytes.

use serde::Serialize;
use serde_json::Value;

/// Render any serializable value as canonical JSON text.
pub fn to_canonical<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    // 17 significant digits round-trips every f64 exactly
                    out.push_str(&format!("{f:.16e}"));
                } else {
                    out.push_str(&n.to_string());
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string encodes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(indent + 1, out);
                write_value(item, indent + 1, out);
            }
            newline(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            // serde_json's default map is ordered by key
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(indent + 1, out);
                out.push_str(&serde_json::to_string(k).expect("key encodes"));
                out.push_str(": ");
                write_value(item, indent + 1, out);
            }
            newline(indent, out);
            out.push('}');
        }
    }
}

fn newline(indent: usize, out: &mut String) {
    out.push('\n');
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// Format a float for CSV cells with the same 17-significant-digit rule.
pub fn csv_float(f: f64) -> String {
    format!("{f:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for &f in &[0.1, -2.5e-7, 4.8, 1.0 / 3.0, f64::MAX, 0.0] {
            let s = csv_float(f);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), f.to_bits(), "{s}");
        }
    }

    #[test]
    fn keys_are_sorted_and_stable() {
        #[derive(Serialize)]
        struct T {
            zebra: f64,
            apple: u32,
        }
        let a = to_canonical(&T { zebra: 1.5, apple: 3 }).unwrap();
        assert!(a.find("\"apple\"").unwrap() < a.find("\"zebra\"").unwrap());
        let b = to_canonical(&T { zebra: 1.5, apple: 3 }).unwrap();
        assert_eq!(a, b);
    }
}
