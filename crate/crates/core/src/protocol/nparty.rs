//! Reduction of an N-party conversation to pairwise sessions.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PairingError {
    #[error("at least two users are required, got {0}")]
    TooFewUsers(usize),
    #[error("user {0:?} is listed more than once")]
    DuplicateUser(String),
    #[error("user {0:?} cannot be paired with itself")]
    SelfPair(String),
    #[error("unknown user {0:?}")]
    UnknownUser(String),
    #[error("explicit pair list is empty")]
    EmptyPairList,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairPolicy {
    /// Every unordered pair.
    Full,
    /// Only the listed pairs; order within a pair is ignored.
    Explicit(Vec<(String, String)>),
}

/// Expands `user_ids` into unordered pairs. Each pair is returned with its
/// members in `user_ids` order, and `Full` lists pairs lexicographically by
/// position.
pub fn reduce_nparty(
    user_ids: &[String],
    policy: &PairPolicy,
) -> Result<Vec<(String, String)>, PairingError> {
    if user_ids.len() < 2 {
        return Err(PairingError::TooFewUsers(user_ids.len()));
    }
    for (i, u) in user_ids.iter().enumerate() {
        if user_ids[..i].contains(u) {
            return Err(PairingError::DuplicateUser(u.clone()));
        }
    }
    let position = |u: &str| {
        user_ids
            .iter()
            .position(|x| x == u)
            .ok_or_else(|| PairingError::UnknownUser(u.to_owned()))
    };
    let indices: Vec<(usize, usize)> = match policy {
        PairPolicy::Full => (0..user_ids.len())
            .flat_map(|a| (a + 1..user_ids.len()).map(move |b| (a, b)))
            .collect(),
        PairPolicy::Explicit(pairs) => {
            if pairs.is_empty() {
                return Err(PairingError::EmptyPairList);
            }
            let mut out: Vec<(usize, usize)> = Vec::with_capacity(pairs.len());
            for (x, y) in pairs {
                let (a, b) = (position(x)?, position(y)?);
                if a == b {
                    return Err(PairingError::SelfPair(x.clone()));
                }
                let pair = (a.min(b), a.max(b));
                if !out.contains(&pair) {
                    out.push(pair);
                }
            }
            out
        }
    };
    Ok(indices
        .into_iter()
        .map(|(a, b)| (user_ids[a].clone(), user_ids[b].clone()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn users(n: usize) -> Vec<String> {
        (1..=n).map(|k| k.to_string()).collect()
    }

    fn pair(a: &str, b: &str) -> (String, String) {
        (a.to_owned(), b.to_owned())
    }

    #[test]
    fn full_pairs() {
        assert_eq!(
            reduce_nparty(&users(3), &PairPolicy::Full).unwrap(),
            vec![pair("1", "2"), pair("1", "3"), pair("2", "3")]
        );
        assert_eq!(
            reduce_nparty(&users(5), &PairPolicy::Full).unwrap().len(),
            10
        );
        assert_eq!(
            reduce_nparty(&users(2), &PairPolicy::Full).unwrap().len(),
            1
        );
    }

    #[test]
    fn explicit_pairs_are_unordered_and_deduplicated() {
        let p = PairPolicy::Explicit(vec![pair("1", "2"), pair("2", "1")]);
        assert_eq!(reduce_nparty(&users(3), &p).unwrap(), vec![pair("1", "2")]);
        let p = PairPolicy::Explicit(vec![pair("3", "1"), pair("2", "3")]);
        assert_eq!(
            reduce_nparty(&users(3), &p).unwrap(),
            vec![pair("1", "3"), pair("2", "3")]
        );
    }

    #[test]
    fn rejections() {
        assert_eq!(
            reduce_nparty(&users(1), &PairPolicy::Full),
            Err(PairingError::TooFewUsers(1))
        );
        assert_eq!(
            reduce_nparty(&users(3), &PairPolicy::Explicit(vec![pair("1", "1")])),
            Err(PairingError::SelfPair("1".into()))
        );
        assert_eq!(
            reduce_nparty(&users(3), &PairPolicy::Explicit(vec![pair("1", "9")])),
            Err(PairingError::UnknownUser("9".into()))
        );
        assert_eq!(
            reduce_nparty(&users(3), &PairPolicy::Explicit(vec![])),
            Err(PairingError::EmptyPairList)
        );
        let dup = vec!["a".to_owned(), "a".to_owned()];
        assert_eq!(
            reduce_nparty(&dup, &PairPolicy::Full),
            Err(PairingError::DuplicateUser("a".into()))
        );
    }

    #[test]
    fn full_contains_each_pair_once() {
        for n in 2..9 {
            let pairs = reduce_nparty(&users(n), &PairPolicy::Full).unwrap();
            assert_eq!(pairs.len(), n * (n - 1) / 2);
            for (k, (a, b)) in pairs.iter().enumerate() {
                assert_ne!(a, b);
                assert!(!pairs[..k]
                    .iter()
                    .any(|(x, y)| (x == a && y == b) || (x == b && y == a)));
            }
        }
    }
}
