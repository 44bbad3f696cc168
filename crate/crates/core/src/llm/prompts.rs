//! Prompt text sent to chat providers. The operation instructions and the
//! wrapper template are fixed strings; trailing spaces inside them are part
//! of the text.

use crate::ops::OperationKind;

pub const SYSTEM_PROMPT: &str = "You are a data scientist/analyst who edits tabular data every day.";

pub const CONCAT_OPERATION: &str = concat!(
    "Make up two new columns with reasonable and diverse values. \n",
    "Specifically, each row in cell data should have one more element, \n",
    "and the length of column names should increase by one. You can make up data as long\n",
    "as the values look reasonable."
);

pub const EDIT_OPERATION: &str = concat!(
    "Create a new column completely based on one or more\n",
    "existing columns. Some options are but not limited to: binning, string \n",
    "operation based on regular expression, information extraction, information \n",
    "refinement, etc. After the operation, each row in cell data should have \n",
    "one more element, and the length of column names should increase by one."
);

pub const CALC_OPERATION: &str = concat!(
    "Create a new column completely based on one or more \n",
    "existing numerical columns using a type of calculation (mathematical \n",
    "calculations, aggregations, allocations, etc.). After the calculation, \n",
    "each row in cell data should have one more element, and the length of column \n",
    "names should increase by one."
);

pub const UPDATE_OPERATION: &str = concat!(
    "Update title, column names, and description to match the \n",
    "updated cell data."
);

/// Sentence identifying an operation prompt.
pub const MISSION_MARKER: &str = "Your mission is to edit the json-formated tabular datapoint shown above";

const WRAPPER_HEAD: &str = "\n\n  Your mission is to edit the json-formated tabular datapoint shown above \n  and output the modified table in the exact same format.\n\n  Edit the tabular data with following operations:\n  \n  ";

const WRAPPER_TAIL: &str = "\n\n\n  Your output must only be a JSON object, do not explain yourself or output \n  anything else. Again, do not explain yourself or output anything else.\n";

/// Marker opening the description request.
pub const DESCRIPTION_MARKER: &str = "Write a brief description of the table shown above";

/// Instruction text for an LLM-backed operation; `None` for the
/// programmatic ones.
pub fn operation_prompt(op: OperationKind) -> Option<&'static str> {
    match op {
        OperationKind::Concatenation => Some(CONCAT_OPERATION),
        OperationKind::Edit => Some(EDIT_OPERATION),
        OperationKind::Calculation => Some(CALC_OPERATION),
        OperationKind::Update => Some(UPDATE_OPERATION),
        OperationKind::Removal | OperationKind::Reordering => None,
    }
}

/// Fills the operation template: `  {table}` followed by the mission text
/// and one operation instruction.
pub fn wrap_operation(table_json: &str, operation_prompt: &str) -> String {
    format!("  {table_json}{WRAPPER_HEAD}{operation_prompt}{WRAPPER_TAIL}")
}

pub fn description_prompt(table_json: &str) -> String {
    format!(
        "{table_json}\n\n{DESCRIPTION_MARKER} in at most two sentences, \
         summarizing its contents and purpose. Output only the description."
    )
}

/// Which operation instruction a wrapped prompt carries.
pub fn detect_operation(user_prompt: &str) -> Option<OperationKind> {
    if !user_prompt.contains(MISSION_MARKER) {
        return None;
    }
    [
        OperationKind::Concatenation,
        OperationKind::Edit,
        OperationKind::Calculation,
        OperationKind::Update,
    ]
    .into_iter()
    .find(|&op| operation_prompt(op).is_some_and(|p| user_prompt.contains(p)))
}
