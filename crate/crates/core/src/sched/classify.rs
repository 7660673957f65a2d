use serde::Serialize;

use crate::eal::HotSet;
use crate::trace::TrainingInput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Popularity {
    Popular,
    NonPopular,
}

/// An input is popular iff every one of its lookups is hot. Inputs without
/// lookups are popular.
pub fn classify_input(input: &TrainingInput, hot: &HotSet) -> Popularity {
    if input.accesses.iter().all(|a| hot.contains(a)) {
        Popularity::Popular
    } else {
        Popularity::NonPopular
    }
}
