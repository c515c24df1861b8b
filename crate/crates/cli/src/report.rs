//! Deterministic JSON assembly for `report.json`.
//!
//! Numbers carry 17 significant digits (`{:.16e}`) so a reader can
//! round-trip them exactly; integers are printed plain; object keys
//! keep insertion order. Core result types already render themselves in
//! the same style and are embedded verbatim as [`Json::Raw`].

/// One JSON value. Only what the reports need.
pub enum Json {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    /// Pre-rendered JSON embedded without re-encoding.
    Raw(String),
    Array(Vec<Json>),
    Object(Vec<(&'static str, Json)>),
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("\"{x}\"")
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

impl Json {
    pub fn render(&self) -> String {
        match self {
            Json::Bool(b) => b.to_string(),
            Json::Int(i) => i.to_string(),
            Json::Float(x) => fmt_f64(*x),
            Json::Str(s) => format!("\"{}\"", escape(s)),
            Json::Raw(s) => s.clone(),
            Json::Array(items) => {
                let inner: Vec<String> = items.iter().map(Json::render).collect();
                format!("[{}]", inner.join(","))
            }
            Json::Object(fields) => {
                let inner: Vec<String> = fields
                    .iter()
                    .map(|(k, v)| format!("\"{k}\":{}", v.render()))
                    .collect();
                format!("{{{}}}", inner.join(","))
            }
        }
    }
}

/// The success envelope: kind, the seed when one was given, and the
/// kind-specific result object. Thread count is deliberately absent —
/// reports must not depend on it.
pub fn success(kind: &str, seed: Option<u64>, result: Json) -> String {
    let mut fields = vec![("kind", Json::Str(kind.into()))];
    if let Some(s) = seed {
        fields.push(("seed", Json::Int(s as i64)));
    }
    fields.push(("status", Json::Str("ok".into())));
    fields.push(("result", result));
    let mut out = Json::Object(fields).render();
    out.push('\n');
    out
}

/// The diagnostic envelope written when a run fails numerically.
pub fn failure(kind: &str, seed: Option<u64>, message: &str) -> String {
    let mut fields = vec![("kind", Json::Str(kind.into()))];
    if let Some(s) = seed {
        fields.push(("seed", Json::Int(s as i64)));
    }
    fields.push(("status", Json::Str("error".into())));
    fields.push(("error", Json::Str(message.into())));
    let mut out = Json::Object(fields).render();
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_with_full_precision_and_order() {
        let obj = Json::Object(vec![
            ("k", Json::Int(17)),
            ("x", Json::Float(0.1)),
            ("name", Json::Str("a\"b".into())),
            ("flag", Json::Bool(true)),
            ("inner", Json::Raw("{\"c\":1}".into())),
            ("list", Json::Array(vec![Json::Int(1), Json::Int(2)])),
        ]);
        assert_eq!(
            obj.render(),
            "{\"k\":17,\"x\":1.0000000000000001e-1,\"name\":\"a\\\"b\",\"flag\":true,\
             \"inner\":{\"c\":1},\"list\":[1,2]}"
        );
    }

    #[test]
    fn floats_round_trip() {
        for &x in &[0.1, 1.0 / 3.0, 1e-300, 123456.789, -0.0625] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn envelopes_include_seed_only_when_given(){
        let ok = success("renorm", None, Json::Object(vec![("k", Json::Int(17))]));
        assert_eq!(ok, "{\"kind\":\"renorm\",\"status\":\"ok\",\"result\":{\"k\":17}}\n");
        let err = failure("measure", Some(5), "boom");
        assert_eq!(
            err,
            "{\"kind\":\"measure\",\"seed\":5,\"status\":\"error\",\"error\":\"boom\"}\n"
        );
    }
}
