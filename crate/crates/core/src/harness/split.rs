use std::collections::BTreeSet;

use crate::corpus::natural_query_order;
use crate::error::{Error, Result};

/// Two disjoint query sets covering every query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub a: BTreeSet<String>,
    pub b: BTreeSet<String>,
}

impl FoldSplit {
    /// Yields `(train, test)` for both directions: A then B.
    pub fn folds(&self) -> [(&BTreeSet<String>, &BTreeSet<String>); 2] {
        [(&self.a, &self.b), (&self.b, &self.a)]
    }
}

/// Alternates queries in natural id order: 1st, 3rd, ... go to A and
/// 2nd, 4th, ... go to B.
pub fn split_odd_even<'a, I>(query_ids: I) -> Result<FoldSplit>
where
    I: IntoIterator<Item = &'a str>,
{
    let ordered = natural_query_order(query_ids);
    if ordered.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "cross-validation needs at least 2 queries, found {}",
            ordered.len()
        )));
    }
    let mut split = FoldSplit {
        a: BTreeSet::new(),
        b: BTreeSet::new(),
    };
    for (i, q) in ordered.into_iter().enumerate() {
        if i % 2 == 0 {
            split.a.insert(q);
        } else {
            split.b.insert(q);
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn alternates_in_topic_order() {
        let s = split_odd_even(["304", "301", "303", "302"]).unwrap();
        assert_eq!(s.a, set(&["301", "303"]));
        assert_eq!(s.b, set(&["302", "304"]));

        let s = split_odd_even(["1", "2", "3"]).unwrap();
        assert_eq!((s.a, s.b), (set(&["1", "3"]), set(&["2"])));

        // numeric order, not string order
        let s = split_odd_even(["9", "10", "11"]).unwrap();
        assert_eq!(s.a, set(&["9", "11"]));

        let s = split_odd_even(["qd", "qa", "qc", "qb"]).unwrap();
        assert_eq!((s.a, s.b), (set(&["qa", "qc"]), set(&["qb", "qd"])));
    }

    #[test]
    fn single_query_cannot_be_split() {
        assert!(split_odd_even(["1"]).is_err());
        assert!(split_odd_even(std::iter::empty()).is_err());
    }
}
