//! The 24-element single-qubit Clifford group, each element written as the
//! shortest word in `{X/2, -X/2, Y/2, -Y/2, X, Y}`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use crate::gates::rotation;
use crate::hilbert::CMat;

/// One group element: generator rotations `(theta, phi)` in application
/// order, and the resulting unitary.
#[derive(Debug, Clone)]
pub struct Clifford {
    pub word: Vec<(f64, f64)>,
    pub unitary: CMat,
}

pub struct CliffordGroup {
    pub elements: Vec<Clifford>,
    /// `compose[a][b]` is the element equal to applying `a`, then `b`.
    pub compose: Vec<Vec<usize>>,
    pub inverse: Vec<usize>,
}

const GENERATORS: [(f64, f64); 6] =
    [(FRAC_PI_2, 0.0), (FRAC_PI_2, PI), (FRAC_PI_2, FRAC_PI_2), (FRAC_PI_2, -FRAC_PI_2), (PI, 0.0), (PI, FRAC_PI_2)];

fn same_up_to_phase(a: &CMat, b: &CMat) -> bool {
    ((a.adjoint() * b).trace().norm() - 2.0).abs() < 1e-9
}

impl CliffordGroup {
    pub fn get() -> &'static CliffordGroup {
        static G: OnceLock<CliffordGroup> = OnceLock::new();
        G.get_or_init(CliffordGroup::build)
    }

    fn build() -> CliffordGroup {
        // breadth-first over words, so every element keeps a shortest word
        let mut elements = vec![Clifford { word: vec![], unitary: CMat::identity(2, 2) }];
        let mut frontier = vec![0usize];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &i in &frontier {
                for &(theta, phi) in &GENERATORS {
                    let u = rotation(theta, phi) * &elements[i].unitary;
                    if elements.iter().any(|e| same_up_to_phase(&e.unitary, &u)) {
                        continue;
                    }
                    let mut word = elements[i].word.clone();
                    word.push((theta, phi));
                    elements.push(Clifford { word, unitary: u });
                    next.push(elements.len() - 1);
                }
            }
            frontier = next;
        }
        let find = |u: &CMat| elements.iter().position(|e| same_up_to_phase(&e.unitary, u));
        let n = elements.len();
        let compose: Vec<Vec<usize>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| find(&(&elements[b].unitary * &elements[a].unitary)).expect("group is closed"))
                    .collect()
            })
            .collect();
        let inverse = (0..n).map(|a| (0..n).find(|&b| compose[a][b] == 0).expect("every element has an inverse")).collect();
        CliffordGroup { elements, compose, inverse }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Element undoing the product of `seq` (applied left to right).
    pub fn recovery(&self, seq: &[usize]) -> usize {
        let total = seq.iter().fold(0, |acc, &c| self.compose[acc][c]);
        self.inverse[total]
    }

    pub fn mean_word_length(&self) -> f64 {
        self.elements.iter().map(|e| e.word.len()).sum::<usize>() as f64 / self.len() as f64
    }
}
