use std::convert::Infallible;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DdminError<E> {
    #[error("the unreduced input does not pass the test")]
    PreconditionFailed,
    #[error(transparent)]
    Test(E),
}

/// One round of a ddmin run: the current list split into `granularity`
/// contiguous parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition<T> {
    pub units: Vec<T>,
    pub granularity: usize,
}

impl<T: Clone> Partition<T> {
    pub fn new(units: Vec<T>, granularity: usize) -> Self {
        let granularity = granularity.clamp(1, units.len().max(1));
        Partition { units, granularity }
    }

    /// Contiguous parts of near-equal size; earlier parts take the remainder.
    pub fn parts(&self) -> Vec<Vec<T>> {
        let len = self.units.len();
        let n = self.granularity;
        let mut out = Vec::with_capacity(n);
        let mut start = 0;
        for i in 0..n {
            let size = len / n + usize::from(i < len % n);
            out.push(self.units[start..start + size].to_vec());
            start += size;
        }
        out
    }

    pub fn complements(&self) -> Vec<Vec<T>> {
        let len = self.units.len();
        let n = self.granularity;
        let mut out = Vec::with_capacity(n);
        let mut start = 0;
        for i in 0..n {
            let size = len / n + usize::from(i < len % n);
            let mut keep = self.units[..start].to_vec();
            keep.extend_from_slice(&self.units[start + size..]);
            out.push(keep);
            start += size;
        }
        out
    }
}

/// Classic ddmin over a pure predicate on kept subsets.
pub fn ddmin<T, F>(units: &[T], mut test: F) -> Result<Vec<T>, DdminError<Infallible>>
where
    T: Clone,
    F: FnMut(&[T]) -> bool,
{
    ddmin_batched(units, 1, |cands: &[Vec<T>]| {
        Ok(cands.iter().map(|c| test(c)).collect())
    })
}

/// ddmin where candidates of a round are handed to `test` in chunks of at
/// most `chunk`. The first passing candidate in round order is taken, so the
/// result does not depend on the chunk size.
///
/// Each round tries the complements first (dropping one part), then the
/// parts themselves; at granularity 2 these coincide and parts are skipped.
/// A complement success keeps granularity n-1, a part success restarts at 2,
/// and a failed round doubles n until parts are singletons.
pub fn ddmin_batched<T, E, F>(units: &[T], chunk: usize, mut test: F) -> Result<Vec<T>, DdminError<E>>
where
    T: Clone,
    F: FnMut(&[Vec<T>]) -> Result<Vec<bool>, E>,
{
    let chunk = chunk.max(1);
    let all = units.to_vec();
    if !test(std::slice::from_ref(&all)).map_err(DdminError::Test)?[0] {
        return Err(DdminError::PreconditionFailed);
    }
    let mut current = all;
    let mut n = 2;
    while !current.is_empty() {
        let part = Partition::new(current.clone(), n);
        let n_eff = part.granularity;
        let mut candidates: Vec<(Vec<T>, bool)> =
            part.complements().into_iter().map(|c| (c, true)).collect();
        if n_eff > 2 {
            candidates.extend(part.parts().into_iter().map(|p| (p, false)));
        }

        let mut found = None;
        'round: for group in candidates.chunks(chunk) {
            let sets: Vec<Vec<T>> = group.iter().map(|(c, _)| c.clone()).collect();
            let verdicts = test(&sets).map_err(DdminError::Test)?;
            for ((cand, is_complement), ok) in group.iter().zip(verdicts) {
                if ok {
                    found = Some((cand.clone(), *is_complement));
                    break 'round;
                }
            }
        }

        match found {
            Some((keep, true)) => {
                current = keep;
                n = n_eff.saturating_sub(1).max(2);
            }
            Some((keep, false)) => {
                current = keep;
                n = 2;
            }
            None if n_eff < current.len() => n = (2 * n_eff).min(current.len()),
            None => break,
        }
    }
    Ok(current)
}
