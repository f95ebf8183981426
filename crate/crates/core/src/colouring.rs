//! Greedy element colouring for lock-free coloured assembly.

use std::io;

use thiserror::Error;

use crate::mesh::DofMap;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ColouringError {
    #[error("colour ids must be 0..n without gaps; colour {0} is unused")]
    GapInColours(usize),
    #[error("elements {first} and {second} share node {node} but both have colour {colour}")]
    Conflict {
        colour: usize,
        first: usize,
        second: usize,
        node: usize,
    },
}

/// Assignment of a colour to every element, plus the per-colour element lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Colouring {
    colour_of: Vec<usize>,
    classes: Vec<Vec<usize>>,
}

impl Colouring {
    /// Classic greedy colouring in element index order.
    ///
    /// Each element takes the smallest colour not already held by an element
    /// it shares a node with. Neighbours are found through a node→elements
    /// index rather than by comparing element pairs.
    pub fn greedy(map: &DofMap) -> Self {
        let n_elements = map.n_elements();
        let node_elements = node_to_elements(map);

        let mut colour_of = vec![usize::MAX; n_elements];
        // stamp[c] == e + 1 marks colour c as taken by a neighbour of e
        let mut stamp: Vec<usize> = Vec::new();
        for e in 0..n_elements {
            for &node in map.element_nodes(e) {
                for &other in &node_elements[node] {
                    let c = colour_of[other];
                    if c != usize::MAX {
                        stamp[c] = e + 1;
                    }
                }
            }
            let colour = (0..stamp.len())
                .find(|&c| stamp[c] != e + 1)
                .unwrap_or(stamp.len());
            if colour == stamp.len() {
                stamp.push(0);
            }
            colour_of[e] = colour;
        }
        Self::from_assignment(colour_of).expect("greedy colours are gap-free")
    }

    /// Wraps an explicit colour per element. The assignment is not checked for
    /// node conflicts; see [`Colouring::find_conflict`].
    pub fn from_assignment(colour_of: Vec<usize>) -> Result<Self, ColouringError> {
        let n_colours = colour_of.iter().max().map_or(0, |&c| c + 1);
        let mut classes = vec![Vec::new(); n_colours];
        for (e, &c) in colour_of.iter().enumerate() {
            classes[c].push(e);
        }
        if let Some(empty) = classes.iter().position(|c| c.is_empty()) {
            return Err(ColouringError::GapInColours(empty));
        }
        Ok(Self { colour_of, classes })
    }

    pub fn n_colours(&self) -> usize {
        self.classes.len()
    }

    pub fn colour_of(&self, element: usize) -> usize {
        self.colour_of[element]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.colour_of
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn n_elements(&self) -> usize {
        self.colour_of.len()
    }

    /// Fraction of the elements carried by each colour.
    pub fn distribution(&self) -> Vec<(usize, f64)> {
        let total = self.n_elements() as f64;
        self.classes
            .iter()
            .enumerate()
            .map(|(c, class)| (c, class.len() as f64 / total))
            .collect()
    }

    /// First pair of same-coloured elements sharing a node, if any.
    pub fn find_conflict(&self, map: &DofMap) -> Option<ColouringError> {
        let node_elements = node_to_elements(map);
        for (node, elements) in node_elements.iter().enumerate() {
            for (i, &a) in elements.iter().enumerate() {
                for &b in &elements[i + 1..] {
                    if self.colour_of[a] == self.colour_of[b] {
                        return Some(ColouringError::Conflict {
                            colour: self.colour_of[a],
                            first: a,
                            second: b,
                            node,
                        });
                    }
                }
            }
        }
        None
    }

    /// Writes `element_id,colour` rows.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["element_id", "colour"])?;
        for (e, c) in self.colour_of.iter().enumerate() {
            w.serialize((e, c))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn node_to_elements(map: &DofMap) -> Vec<Vec<usize>> {
    let mut index = vec![Vec::new(); map.node_count()];
    for e in 0..map.n_elements() {
        for &node in map.element_nodes(e) {
            index[node].push(e);
        }
    }
    index
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn greedy(n: usize) -> Colouring {
        Colouring::greedy(&DofMap::build(&Mesh::structured(n), 1, 1))
    }

    // exhaustive pairwise check, independent of the node index
    fn pairwise_valid(map: &DofMap, c: &Colouring) -> bool {
        for a in 0..map.n_elements() {
            for b in a + 1..map.n_elements() {
                let shares = map
                    .element_nodes(a)
                    .iter()
                    .any(|v| map.element_nodes(b).contains(v));
                if shares && c.colour_of(a) == c.colour_of(b) {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn structured_uses_four_even_colours() {
        let c = greedy(6);
        assert_eq!(c.n_colours(), 4);
        assert!(c.classes().iter().all(|class| class.len() == 9));
        for (_, f) in c.distribution() {
            assert_eq!(f, 0.25);
        }
        for n in 2..12 {
            assert_eq!(greedy(n).n_colours(), 4, "n = {n}");
        }
    }

    #[test]
    fn single_element_and_strip() {
        let c = greedy(1);
        assert_eq!(c.n_colours(), 1);
        assert_eq!(c.distribution(), vec![(0, 1.0)]);

        let nodes = vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [2.0, 0.0],
            [0.0, 1.0],
            [1.0, 1.0],
            [2.0, 1.0],
        ];
        let strip = Mesh::new(nodes, vec![[0, 1, 4, 3], [1, 2, 5, 4]]).unwrap();
        let c = Colouring::greedy(&DofMap::build(&strip, 1, 1));
        assert_eq!(c.n_colours(), 2);
    }

    #[test]
    fn valid_on_every_small_mesh() {
        for n in 1..=12 {
            for p in [1, 2] {
                let map = DofMap::build(&Mesh::structured(n), p, 1);
                let c = Colouring::greedy(&map);
                assert!(pairwise_valid(&map, &c));
                assert!(c.find_conflict(&map).is_none());
                let sum: f64 = c.distribution().iter().map(|x| x.1).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn merged_colours_are_detected() {
        let map = DofMap::build(&Mesh::structured(2), 1, 1);
        let bad = Colouring::from_assignment(vec![0, 0, 1, 2]).unwrap();
        assert!(matches!(
            bad.find_conflict(&map),
            Some(ColouringError::Conflict {
                first: 0,
                second: 1,
                ..
            })
        ));
        assert_eq!(
            Colouring::from_assignment(vec![0, 2]).unwrap_err(),
            ColouringError::GapInColours(1)
        );
    }

    #[test]
    fn deterministic_and_csv() {
        assert_eq!(greedy(9), greedy(9));
        let mut out = Vec::new();
        greedy(2).write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "element_id,colour\n0,0\n1,1\n2,2\n3,3\n"
        );
    }
}
