//! Deterministic JSON: sorted keys, numbers rounded to 12 significant digits.

use serde_json::{Map, Number, Value};

pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses");
    // avoid "-0.0"
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    Number::from_f64(rounded).map_or(Value::Null, Value::Number)
}

pub fn obj<I, K>(entries: I) -> Value
where
    I: IntoIterator<Item = (K, Value)>,
    K: Into<String>,
{
    Value::Object(entries.into_iter().map(|(k, v)| (k.into(), v)).collect::<Map<_, _>>())
}

pub fn num_map<I, K>(entries: I) -> Value
where
    I: IntoIterator<Item = (K, f64)>,
    K: Into<String>,
{
    obj(entries.into_iter().map(|(k, v)| (k, num(v))))
}

pub fn render(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(num(1.0 / 6.0).to_string(), "0.166666666667");
        assert_eq!(num(-0.0).to_string(), "0.0");
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(num(2.0).to_string(), "2.0");
    }

    #[test]
    fn keys_are_sorted() {
        let v = obj([("b", num(1.0)), ("a", num(2.0))]);
        assert!(render(&v).find("\"a\"").unwrap() < render(&v).find("\"b\"").unwrap());
    }
}
