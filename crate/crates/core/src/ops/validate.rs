use super::OperationKind;
use crate::table::Table;

/// Position in `after` of each `before` column, matching names left to
/// right and consuming each `after` column at most once.
fn column_positions(before: &Table, after: &Table) -> Result<Vec<usize>, String> {
    let mut used = vec![false; after.n_columns()];
    before
        .column_names()
        .iter()
        .map(|name| {
            let pos = after
                .column_names()
                .iter()
                .enumerate()
                .position(|(j, c)| !used[j] && c == name)
                .ok_or_else(|| format!("original column `{name}` missing"))?;
            used[pos] = true;
            Ok(pos)
        })
        .collect()
}

/// Chat models only see a sample of rows, so their output rows must each
/// come from `before` (projected onto the original columns).
fn check_row_subset(before: &Table, after: &Table, positions: &[usize], v: &mut Vec<String>) {
    if after.n_rows() > before.n_rows() {
        v.push(format!("row count grew from {} to {}", before.n_rows(), after.n_rows()));
    }
    if before.n_rows() > 0 && after.n_rows() == 0 {
        v.push("all rows dropped".into());
    }
    for (i, row) in after.rows().iter().enumerate() {
        let projected: Vec<&String> = positions.iter().map(|&p| &row[p]).collect();
        let found = before.rows().iter().any(|b| b.iter().zip(&projected).all(|(x, y)| x == *y));
        if !found {
            v.push(format!("row {i} does not preserve original cells"));
        }
    }
}

/// Structural postconditions of each operation.
///
/// Concatenation adds one or two columns; edit and calculation add exactly
/// one; original columns and their cells must survive. Update keeps the
/// columns and cells and changes title, description or column names.
/// Removal drops one or two columns keeping order; reordering permutes
/// columns and cells together.
pub fn validate_transformed(before: &Table, after: &Table, op: OperationKind) -> Result<(), Vec<String>> {
    let mut v = Vec::new();
    let (nb, na) = (before.n_columns(), after.n_columns());
    match op {
        OperationKind::Concatenation | OperationKind::Edit | OperationKind::Calculation => {
            let allowed: &[usize] = if op == OperationKind::Concatenation { &[1, 2] } else { &[1] };
            if na < nb || !allowed.contains(&(na - nb)) {
                v.push(format!("{op} changed column count from {nb} to {na}"));
            }
            match column_positions(before, after) {
                Ok(pos) => check_row_subset(before, after, &pos, &mut v),
                Err(e) => v.push(e),
            }
        }
        OperationKind::Update => {
            if na != nb {
                v.push(format!("update changed column count from {nb} to {na}"));
            } else {
                let identity: Vec<usize> = (0..nb).collect();
                check_row_subset(before, after, &identity, &mut v);
                if after.title() == before.title()
                    && after.description() == before.description()
                    && after.column_names() == before.column_names()
                {
                    v.push("update left title, description and column names unchanged".into());
                }
            }
        }
        OperationKind::Removal => {
            if !(nb >= na + 1 && nb <= na + 2 && na >= 2) {
                v.push(format!("removal went from {nb} to {na} columns"));
            }
            match column_positions(after, before) {
                Ok(pos) => {
                    if pos.windows(2).any(|w| w[0] > w[1]) {
                        v.push("surviving columns reordered".into());
                    }
                    check_aligned_rows(before, after, &pos, &mut v);
                }
                Err(e) => v.push(e.replace("original", "surviving")),
            }
        }
        OperationKind::Reordering => {
            if na != nb {
                v.push(format!("reordering changed column count from {nb} to {na}"));
            } else {
                match column_positions(after, before) {
                    Ok(pos) => {
                        if nb >= 2 && pos.iter().enumerate().all(|(i, &p)| i == p) {
                            v.push("reordering produced the identity permutation".into());
                        }
                        check_aligned_rows(before, after, &pos, &mut v);
                    }
                    Err(e) => v.push(e),
                }
            }
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Row i of `after` must equal row i of `before` read at `pos`.
fn check_aligned_rows(before: &Table, after: &Table, pos: &[usize], v: &mut Vec<String>) {
    if before.n_rows() != after.n_rows() {
        v.push(format!("row count changed from {} to {}", before.n_rows(), after.n_rows()));
        return;
    }
    for (i, (a, b)) in after.rows().iter().zip(before.rows()).enumerate() {
        if a.iter().zip(pos).any(|(cell, &p)| *cell != b[p]) {
            v.push(format!("row {i} cells moved inconsistently"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use OperationKind::*;

    fn t(title: &str, cols: &[&str], rows: &[&[&str]]) -> Table {
        Table::new(
            "x",
            title,
            "",
            cols.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn edit_with_two_new_columns_is_violation() {
        let b = t("T", &["a"], &[&["1"]]);
        let a = t("T", &["a", "x", "y"], &[&["1", "p", "q"]]);
        assert!(validate_transformed(&b, &a, Edit).is_err());
        assert!(validate_transformed(&b, &a, Calculation).is_err());
        assert!(validate_transformed(&b, &a, Concatenation).is_ok());
    }

    #[test]
    fn update_with_altered_cells_is_violation() {
        let b = t("T", &["a", "b"], &[&["1", "2"]]);
        let a = t("T2", &["a", "b"], &[&["1", "3"]]);
        assert!(validate_transformed(&b, &a, Update).is_err());
        let ok = t("T2", &["a", "b"], &[&["1", "2"]]);
        assert!(validate_transformed(&b, &ok, Update).is_ok());
        assert!(validate_transformed(&b, &b, Update).is_err());
    }

    #[test]
    fn added_column_may_sit_anywhere_but_originals_must_survive() {
        let b = t("T", &["a", "b"], &[&["1", "2"], &["3", "4"]]);
        let front = t("T", &["n", "a", "b"], &[&["z", "3", "4"]]);
        assert!(validate_transformed(&b, &front, Edit).is_ok());
        let renamed = t("T", &["a", "B", "n"], &[&["1", "2", "z"]]);
        assert!(validate_transformed(&b, &renamed, Edit).is_err());
        let invented = t("T", &["a", "b", "n"], &[&["9", "9", "z"]]);
        assert!(validate_transformed(&b, &invented, Edit).is_err());
    }

    #[test]
    fn removal_and_reordering_checks() {
        let b = t("T", &["a", "b", "c"], &[&["1", "2", "3"]]);
        assert!(validate_transformed(&b, &t("T", &["a", "c"], &[&["1", "3"]]), Removal).is_ok());
        assert!(validate_transformed(&b, &t("T", &["c", "a"], &[&["3", "1"]]), Removal).is_err());
        assert!(validate_transformed(&b, &t("T", &["c", "a", "b"], &[&["3", "1", "2"]]), Reordering).is_ok());
        assert!(validate_transformed(&b, &t("T", &["c", "a", "b"], &[&["1", "3", "2"]]), Reordering).is_err());
        assert!(validate_transformed(&b, &b, Reordering).is_err());
    }
}
