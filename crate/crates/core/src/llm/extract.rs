use super::LlmError;

/// End (exclusive) of the balanced object opening at `start`, tracking
/// string literals so braces inside them do not count.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            match (escaped, b) {
                (true, _) => escaped = false,
                (false, b'\\') => escaped = true,
                (false, b'"') => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// First balanced `{...}` substring of `completion` that parses as a JSON
/// object.
pub fn extract_json_object(completion: &str) -> Result<&str, LlmError> {
    let bytes = completion.as_bytes();
    for start in bytes.iter().enumerate().filter(|(_, &b)| b == b'{').map(|(i, _)| i) {
        let Some(end) = balanced_end(bytes, start) else { continue };
        let candidate = &completion[start..end];
        if matches!(serde_json::from_str::<serde_json::Value>(candidate), Ok(serde_json::Value::Object(_))) {
            return Ok(candidate);
        }
    }
    Err(LlmError::Extraction(format!(
        "no parseable JSON object in {} bytes of output",
        completion.len()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extraction_examples() {
        assert_eq!(extract_json_object("Here you go: {\"a\":1} done").unwrap(), "{\"a\":1}");
        assert_eq!(extract_json_object("{\"a\":{\"b\":2}}").unwrap(), "{\"a\":{\"b\":2}}");
        assert!(matches!(extract_json_object("{\"a\":"), Err(LlmError::Extraction(_))));
        assert!(extract_json_object("not json").is_err());
    }

    #[test]
    fn braces_inside_strings_and_bad_prefix() {
        assert_eq!(extract_json_object("x {\"a\":\"}{\"} y").unwrap(), "{\"a\":\"}{\"}");
        // the first balanced group is not JSON; the second is
        assert_eq!(extract_json_object("{oops} then {\"ok\":true}").unwrap(), "{\"ok\":true}");
        assert_eq!(extract_json_object("```json\n{\"k\":\"\\\"q\\\"\"}\n```").unwrap(), "{\"k\":\"\\\"q\\\"\"}");
    }

    proptest::proptest! {
        #[test]
        fn result_is_parseable_substring(s in "[ a-z{}\":,0-9\\\\]{0,40}") {
            if let Ok(obj) = extract_json_object(&s) {
                proptest::prop_assert!(s.contains(obj));
                let v: serde_json::Value = serde_json::from_str(obj).unwrap();
                proptest::prop_assert!(v.is_object());
            }
        }
    }
}
