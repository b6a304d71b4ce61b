use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Renamed {
    pub text: String,
    /// Names from `flag` still present as whole tokens after renaming; the
    /// text needs a manual pass.
    pub residual: Vec<String>,
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn at_boundary(text: &str, start: usize, end: usize) -> bool {
    let before = text[..start]
        .chars()
        .next_back()
        .is_none_or(|c| !is_token_char(c));
    let after = text[end..].chars().next().is_none_or(|c| !is_token_char(c));
    before && after
}

fn occurs_as_token(text: &str, name: &str) -> bool {
    !name.is_empty()
        && text
            .match_indices(name)
            .any(|(i, _)| at_boundary(text, i, i + name.len()))
}

/// Replaces whole-token occurrences of each `from` name by its `to` name in
/// one left-to-right pass, trying longer names first so that `CarKey` is
/// never read as `Car` + `Key`. Replacements are not rescanned.
pub fn rename_step(text: &str, names: &[(String, String)], flag: &[&str]) -> Renamed {
    let mut order: Vec<&(String, String)> =
        names.iter().filter(|(from, _)| !from.is_empty()).collect();
    order.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    'scan: while i < text.len() {
        for (from, to) in &order {
            if text[i..].starts_with(from.as_str()) && at_boundary(text, i, i + from.len()) {
                out.push_str(to);
                i += from.len();
                continue 'scan;
            }
        }
        let c = text[i..]
            .chars()
            .next()
            .expect("i is a char boundary below len");
        out.push(c);
        i += c.len_utf8();
    }
    let residual = flag
        .iter()
        .filter(|n| occurs_as_token(&out, n))
        .map(|n| n.to_string())
        .collect();
    Renamed {
        text: out,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(p: &[(&str, &str)]) -> Vec<(String, String)> {
        p.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn virus_becomes_cooking_tools() {
        let r = rename_step(
            "Virus infects Computer",
            &pairs(&[("Virus", "CookingTools"), ("Computer", "Sink")]),
            &["Virus", "Computer"],
        );
        assert_eq!(r.text, "CookingTools infects Sink");
        assert!(r.residual.is_empty());
    }

    #[test]
    fn empty_map_leaves_text() {
        let r = rename_step("Someone attacks", &[], &[]);
        assert_eq!(r.text, "Someone attacks");
    }

    #[test]
    fn longest_name_wins_and_tokens_stay_whole() {
        let map = pairs(&[("Car", "Boat"), ("Car Key", "Oar"), ("Key", "Lock")]);
        let r = rename_step("Car Key opens Car; Carpet and Key", &map, &[]);
        // "Car Key" is one name; "Carpet" is not a token match for "Car".
        assert_eq!(r.text, "Oar opens Boat; Carpet and Lock");
        let r = rename_step(
            "CarKey near Car",
            &pairs(&[("Car", "Boat"), ("CarKey", "Fob")]),
            &[],
        );
        assert_eq!(r.text, "Fob near Boat");
    }

    #[test]
    fn replacements_are_not_chained() {
        let r = rename_step("A meets B", &pairs(&[("A", "B"), ("B", "C")]), &[]);
        assert_eq!(r.text, "B meets C");
    }

    #[test]
    fn leftover_foreign_names_are_flagged() {
        let r = rename_step(
            "Virus infects Computer",
            &pairs(&[("Virus", "Germ")]),
            &["Virus", "Computer"],
        );
        assert_eq!(r.residual, vec!["Computer".to_string()]);
    }
}
