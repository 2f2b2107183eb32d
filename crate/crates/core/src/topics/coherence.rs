//! UMass coherence, normalized per word pair.
//!
//! For a ranked list `w_1..w_n`:
//! `C = sum_{m=2..n} sum_{l<m} ln((D(w_m, w_l) + 1) / D(w_l))`,
//! divided by `n(n-1)/2`. `D` counts documents containing the word(s).

use super::{LdaError, LdaModel};
use crate::vectorize::DocTermMatrix;

/// Sorted document postings per term.
fn postings(docs: &DocTermMatrix) -> Vec<Vec<u32>> {
    let mut post = vec![Vec::new(); docs.n_terms];
    for (d, row) in docs.rows.iter().enumerate() {
        for &(t, w) in row {
            if w > 0.0 {
                post[t].push(d as u32);
            }
        }
    }
    post
}

fn intersection_size(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

fn list_score(list: &[usize], post: &[Vec<u32>]) -> Result<f64, LdaError> {
    if list.len() < 2 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for m in 1..list.len() {
        for l in 0..m {
            let (wm, wl) = (list[m], list[l]);
            let d_l = post.get(wl).map_or(0, Vec::len);
            if d_l == 0 {
                return Err(LdaError::UnseenTerm(wl));
            }
            let joint = intersection_size(&post[wm], &post[wl]);
            sum += ((joint as f64 + 1.0) / d_l as f64).ln();
        }
    }
    let pairs = list.len() * (list.len() - 1) / 2;
    Ok(sum / pairs as f64)
}

/// Mean normalized UMass score of ranked term-index lists over `docs`.
pub fn umass_for_lists(lists: &[Vec<usize>], docs: &DocTermMatrix) -> Result<f64, LdaError> {
    if lists.is_empty() {
        return Ok(0.0);
    }
    let post = postings(docs);
    let mut total = 0.0;
    for list in lists {
        total += list_score(list, &post)?;
    }
    Ok(total / lists.len() as f64)
}

/// Mean normalized UMass coherence of every topic's `top_n` words.
pub fn umass_coherence(model: &LdaModel, docs: &DocTermMatrix, top_n: usize) -> Result<f64, LdaError> {
    let lists = (0..model.n_topics())
        .map(|k| model.ranked_terms(k).map(|r| r.into_iter().take(top_n).collect()))
        .collect::<Result<Vec<Vec<usize>>, _>>()?;
    umass_for_lists(&lists, docs)
}
