//! Binary Merkle trees with inclusion proofs.
//!
//! Leaves are hashed as `H(0x00 ‖ data)` and internal nodes as
//! `H(0x01 ‖ left ‖ right)`. A level of odd width is padded by duplicating
//! its last node, so a proof always has `⌈log₂ n⌉` siblings.

use serde::{Deserialize, Serialize};
use sha3::{Digest, Keccak256, Sha3_256};
use thiserror::Error;

use crate::primitives::B256;

const LEAF_TAG: u8 = 0x00;
const NODE_TAG: u8 = 0x01;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MerkleError {
    #[error("cannot build a Merkle tree with no leaves")]
    EmptyTree,
    #[error("leaf index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MerkleHasher {
    #[default]
    Keccak256,
    Sha3_256,
}

impl MerkleHasher {
    fn digest(&self, tag: u8, parts: &[&[u8]]) -> B256 {
        fn run<D: Digest>(tag: u8, parts: &[&[u8]]) -> B256 {
            let mut h = D::new();
            h.update([tag]);
            for p in parts {
                h.update(p);
            }
            B256(h.finalize().as_slice().try_into().expect("32-byte digest"))
        }
        match self {
            MerkleHasher::Keccak256 => run::<Keccak256>(tag, parts),
            MerkleHasher::Sha3_256 => run::<Sha3_256>(tag, parts),
        }
    }

    pub fn hash_leaf(&self, data: &[u8]) -> B256 {
        self.digest(LEAF_TAG, &[data])
    }

    pub fn hash_node(&self, left: &B256, right: &B256) -> B256 {
        self.digest(NODE_TAG, &[&left.0, &right.0])
    }
}

/// Which side of the running hash a sibling sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sibling {
    pub hash: B256,
    pub side: Side,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleProof {
    pub index: usize,
    pub siblings: Vec<Sibling>,
}

impl MerkleProof {
    /// Folds a leaf hash through the siblings.
    pub fn compute_root(&self, hasher: MerkleHasher, leaf_hash: B256) -> B256 {
        self.siblings.iter().fold(leaf_hash, |acc, s| match s.side {
            Side::Left => hasher.hash_node(&s.hash, &acc),
            Side::Right => hasher.hash_node(&acc, &s.hash),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("proof serializes")
    }
}

/// `levels[0]` holds leaf hashes; the last level holds the root alone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerkleTree {
    hasher: MerkleHasher,
    levels: Vec<Vec<B256>>,
}

impl MerkleTree {
    pub fn build<T: AsRef<[u8]>>(leaves: &[T]) -> Result<Self, MerkleError> {
        Self::build_with(MerkleHasher::default(), leaves)
    }

    pub fn build_with<T: AsRef<[u8]>>(hasher: MerkleHasher, leaves: &[T]) -> Result<Self, MerkleError> {
        let hashes = leaves.iter().map(|l| hasher.hash_leaf(l.as_ref())).collect();
        Self::from_leaf_hashes(hasher, hashes)
    }

    pub fn from_leaf_hashes(hasher: MerkleHasher, leaf_hashes: Vec<B256>) -> Result<Self, MerkleError> {
        if leaf_hashes.is_empty() {
            return Err(MerkleError::EmptyTree);
        }
        let mut levels = vec![leaf_hashes];
        while levels.last().unwrap().len() > 1 {
            let cur = levels.last().unwrap();
            let next = cur
                .chunks(2)
                .map(|pair| hasher.hash_node(&pair[0], pair.get(1).unwrap_or(&pair[0])))
                .collect();
            levels.push(next);
        }
        Ok(MerkleTree { hasher, levels })
    }

    pub fn hasher(&self) -> MerkleHasher {
        self.hasher
    }

    pub fn root(&self) -> B256 {
        self.levels.last().unwrap()[0]
    }

    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn height(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn leaf_hash(&self, index: usize) -> Option<B256> {
        self.levels[0].get(index).copied()
    }

    pub fn prove(&self, index: usize) -> Result<MerkleProof, MerkleError> {
        if index >= self.len() {
            return Err(MerkleError::IndexOutOfRange { index, len: self.len() });
        }
        let mut siblings = Vec::with_capacity(self.height());
        let mut i = index;
        for level in &self.levels[..self.height()] {
            let (sib, side) = if i.is_multiple_of(2) {
                (*level.get(i + 1).unwrap_or(&level[i]), Side::Right)
            } else {
                (level[i - 1], Side::Left)
            };
            siblings.push(Sibling { hash: sib, side });
            i /= 2;
        }
        Ok(MerkleProof { index, siblings })
    }

    /// Replaces leaf `index` with `data` and recomputes its path.
    pub fn update(&mut self, index: usize, data: &[u8]) -> Result<(), MerkleError> {
        self.update_hash(index, self.hasher.hash_leaf(data))
    }

    pub fn update_hash(&mut self, index: usize, leaf_hash: B256) -> Result<(), MerkleError> {
        if index >= self.len() {
            return Err(MerkleError::IndexOutOfRange { index, len: self.len() });
        }
        self.levels[0][index] = leaf_hash;
        let mut i = index;
        for lvl in 0..self.height() {
            let level = &self.levels[lvl];
            let left_i = i & !1;
            let left = level[left_i];
            let right = *level.get(left_i + 1).unwrap_or(&left);
            let parent = self.hasher.hash_node(&left, &right);
            i /= 2;
            self.levels[lvl + 1][i] = parent;
        }
        Ok(())
    }
}

pub fn build_root<T: AsRef<[u8]>>(leaves: &[T]) -> Result<B256, MerkleError> {
    MerkleTree::build(leaves).map(|t| t.root())
}

pub fn prove_inclusion(tree: &MerkleTree, index: usize) -> Result<MerkleProof, MerkleError> {
    tree.prove(index)
}

/// Accepts iff the leaf folds through the proof to `root`.
pub fn verify_inclusion(root: &B256, leaf: &[u8], proof: &MerkleProof) -> bool {
    verify_inclusion_with(MerkleHasher::default(), root, leaf, proof)
}

pub fn verify_inclusion_with(hasher: MerkleHasher, root: &B256, leaf: &[u8], proof: &MerkleProof) -> bool {
    proof.compute_root(hasher, hasher.hash_leaf(leaf)) == *root
}
