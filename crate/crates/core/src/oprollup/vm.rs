//! Register machine checked one instruction at a time on L1. Memory is a
//! fixed array of 64-bit cells committed by a Merkle root; every cell an
//! instruction touches, including the instruction itself, is supplied with
//! an inclusion proof against the pre-state root.
//!
//! `r0` always reads zero, which gives absolute addressing through
//! `LOAD rd, r0, addr` and unconditional jumps through `JUMPZ r0, target`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::OpError;
use crate::l1sim::abi::{Decoder, Encoder};
use crate::merkle::{MerkleHasher, MerkleProof, MerkleTree, Side, Sibling};
use crate::primitives::{keccak256, keccak_concat, B256};

pub const REGISTERS: usize = 8;
pub const MEMORY_CELLS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Opcode {
    /// `rd = rs + rt + imm`
    Add = 1,
    /// `rd = rs · rt`
    Mul = 2,
    /// `rd = mem[rs + imm]`
    Load = 3,
    /// `mem[rs + imm] = rt`
    Store = 4,
    /// `pc = imm` if `rs = 0`
    JumpZ = 5,
    /// `rd = word rt of preimage(mem[rs + imm .. rs + imm + 4])`
    LoadPre = 6,
    /// Leaves the state unchanged.
    Halt = 7,
}

/// Packed as `op:8 | rd:8 | rs:8 | rt:8 | imm:32`, arithmetic wrapping mod 2⁶⁴.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub op: Opcode,
    pub rd: u8,
    pub rs: u8,
    pub rt: u8,
    pub imm: i32,
}

impl Instruction {
    pub fn new(op: Opcode, rd: u8, rs: u8, rt: u8, imm: i32) -> Self {
        Self { op, rd, rs, rt, imm }
    }

    pub fn encode(&self) -> u64 {
        (self.op as u64) << 56
            | (self.rd as u64) << 48
            | (self.rs as u64) << 40
            | (self.rt as u64) << 32
            | self.imm as u32 as u64
    }

    pub fn decode(word: u64) -> Result<Self, OpError> {
        let op = match (word >> 56) as u8 {
            1 => Opcode::Add,
            2 => Opcode::Mul,
            3 => Opcode::Load,
            4 => Opcode::Store,
            5 => Opcode::JumpZ,
            6 => Opcode::LoadPre,
            7 => Opcode::Halt,
            _ => return Err(OpError::IllegalInstruction(word)),
        };
        let [rd, rs, rt] = [(word >> 48) as u8, (word >> 40) as u8, (word >> 32) as u8];
        if [rd, rs, rt].iter().any(|r| *r as usize >= REGISTERS) {
            return Err(OpError::IllegalInstruction(word));
        }
        Ok(Self { op, rd, rs, rt, imm: word as u32 as i32 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VmState {
    pub pc: u64,
    pub regs: [u64; REGISTERS],
    pub memory_root: B256,
}

impl VmState {
    /// `H(pc ‖ registers ‖ memory root)`
    pub fn hash(&self) -> B256 {
        let regs: Vec<u8> = self.regs.iter().flat_map(|r| r.to_be_bytes()).collect();
        keccak_concat([&self.pc.to_be_bytes()[..], &regs, self.memory_root.as_bytes()])
    }

    pub(crate) fn encode(&self, mut e: Encoder) -> Encoder {
        e = e.u64(self.pc);
        for r in self.regs {
            e = e.u64(r);
        }
        e.b256(self.memory_root)
    }

    pub(crate) fn decode(d: &mut Decoder<'_>) -> Result<Self, OpError> {
        let pc = d.u64()?;
        let mut regs = [0u64; REGISTERS];
        for r in &mut regs {
            *r = d.u64()?;
        }
        Ok(Self { pc, regs, memory_root: d.b256()? })
    }
}

/// Keyed store of data by its Keccak-256 hash.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreimageOracle {
    entries: BTreeMap<B256, Vec<u8>>,
}

impl PreimageOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, data: Vec<u8>) -> B256 {
        let key = keccak256(&data);
        self.entries.insert(key, data);
        key
    }

    /// Rejects data that does not hash to `key`.
    pub fn register_keyed(&mut self, key: B256, data: Vec<u8>) -> Result<(), OpError> {
        if keccak256(&data) != key {
            return Err(OpError::PreimageMismatch);
        }
        self.entries.insert(key, data);
        Ok(())
    }

    pub fn get(&self, key: &B256) -> Result<&[u8], OpError> {
        self.entries.get(key).map(Vec::as_slice).ok_or(OpError::PreimageUnavailable(*key))
    }

    /// Eight-byte big-endian chunk `index` of the preimage, zero past the end.
    pub fn word(&self, key: &B256, index: u64) -> Result<u64, OpError> {
        let data = self.get(key)?;
        let mut chunk = [0u8; 8];
        let start = usize::try_from(index).ok().and_then(|i| i.checked_mul(8));
        if let Some(start) = start.filter(|s| *s < data.len()) {
            let end = (start + 8).min(data.len());
            chunk[..end - start].copy_from_slice(&data[start..end]);
        }
        Ok(u64::from_be_bytes(chunk))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenCell {
    pub addr: u64,
    pub value: u64,
    pub proof: MerkleProof,
}

/// Memory cells the next instruction touches, each proven against the
/// pre-state root.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepWitness {
    pub cells: Vec<ProvenCell>,
}

pub(crate) fn encode_proof(mut e: Encoder, p: &MerkleProof) -> Encoder {
    e = e.u64(p.index as u64).u64(p.siblings.len() as u64);
    for s in &p.siblings {
        e = e.b256(s.hash).bool(s.side == Side::Right);
    }
    e
}

pub(crate) fn decode_proof(d: &mut Decoder<'_>) -> Result<MerkleProof, OpError> {
    let index = d.u64()? as usize;
    let n = d.u64()?;
    if n > 64 {
        return Err(OpError::BadStepProof("proof too long".into()));
    }
    let siblings = (0..n)
        .map(|_| Ok(Sibling { hash: d.b256()?, side: if d.bool()? { Side::Right } else { Side::Left } }))
        .collect::<Result<_, OpError>>()?;
    Ok(MerkleProof { index, siblings })
}

impl StepWitness {
    pub(crate) fn encode(&self, mut e: Encoder) -> Encoder {
        e = e.u64(self.cells.len() as u64);
        for c in &self.cells {
            e = encode_proof(e.u64(c.addr).u64(c.value), &c.proof);
        }
        e
    }

    pub(crate) fn decode(d: &mut Decoder<'_>) -> Result<Self, OpError> {
        let n = d.u64()?;
        if n > 16 {
            return Err(OpError::BadStepProof("too many cells".into()));
        }
        let cells = (0..n)
            .map(|_| Ok(ProvenCell { addr: d.u64()?, value: d.u64()?, proof: decode_proof(d)? }))
            .collect::<Result<_, OpError>>()?;
        Ok(Self { cells })
    }

    /// Value of `addr`, checked against `root`.
    fn read(&self, root: &B256, addr: u64) -> Result<&ProvenCell, OpError> {
        let cell = self
            .cells
            .iter()
            .find(|c| c.addr == addr)
            .ok_or_else(|| OpError::BadStepProof(format!("no proof for cell {addr}")))?;
        let leaf = MerkleHasher::Keccak256.hash_leaf(&cell.value.to_be_bytes());
        if cell.proof.index as u64 != addr || cell.proof.compute_root(MerkleHasher::Keccak256, leaf) != *root {
            return Err(OpError::BadStepProof(format!("cell {addr} not included in the memory root")));
        }
        Ok(cell)
    }
}

fn effective_addr(base: u64, imm: i32) -> Result<u64, OpError> {
    let addr = base.wrapping_add(imm as i64 as u64);
    if addr as usize >= MEMORY_CELLS {
        return Err(OpError::BadStepProof(format!("address {addr} outside memory")));
    }
    Ok(addr)
}

fn write_reg(regs: &mut [u64; REGISTERS], rd: u8, v: u64) {
    if rd != 0 {
        regs[rd as usize] = v;
    }
}

/// Executes the instruction at `pre.pc` from proven cells alone.
pub fn vm_step(pre: &VmState, witness: &StepWitness, preimages: &PreimageOracle) -> Result<VmState, OpError> {
    let root = &pre.memory_root;
    let ins = Instruction::decode(witness.read(root, pre.pc)?.value)?;
    let mut post = *pre;
    post.pc = pre.pc.wrapping_add(1);
    let r = |i: u8| pre.regs[i as usize];
    match ins.op {
        Opcode::Add => write_reg(&mut post.regs, ins.rd, r(ins.rs).wrapping_add(r(ins.rt)).wrapping_add(ins.imm as i64 as u64)),
        Opcode::Mul => write_reg(&mut post.regs, ins.rd, r(ins.rs).wrapping_mul(r(ins.rt))),
        Opcode::Load => {
            let addr = effective_addr(r(ins.rs), ins.imm)?;
            write_reg(&mut post.regs, ins.rd, witness.read(root, addr)?.value);
        }
        Opcode::Store => {
            let addr = effective_addr(r(ins.rs), ins.imm)?;
            let cell = witness.read(root, addr)?;
            let leaf = MerkleHasher::Keccak256.hash_leaf(&r(ins.rt).to_be_bytes());
            post.memory_root = cell.proof.compute_root(MerkleHasher::Keccak256, leaf);
        }
        Opcode::JumpZ => {
            if r(ins.rs) == 0 {
                post.pc = ins.imm as u32 as u64;
            }
        }
        Opcode::LoadPre => {
            let base = effective_addr(r(ins.rs), ins.imm)?;
            let mut key = [0u8; 32];
            for i in 0..4u64 {
                let addr = effective_addr(base, i as i32)?;
                key[i as usize * 8..][..8].copy_from_slice(&witness.read(root, addr)?.value.to_be_bytes());
            }
            write_reg(&mut post.regs, ins.rd, preimages.word(&B256(key), r(ins.rt))?);
        }
        Opcode::Halt => post.pc = pre.pc,
    }
    Ok(post)
}

/// Full-node machine holding all of memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Machine {
    pc: u64,
    regs: [u64; REGISTERS],
    memory: Vec<u64>,
    tree: MerkleTree,
}

impl Machine {
    /// Loads `program` at address 0 and `data` at the given addresses.
    pub fn new(program: &[u64], data: &[(u64, u64)]) -> Result<Self, OpError> {
        let mut memory = vec![0u64; MEMORY_CELLS];
        if program.len() > MEMORY_CELLS {
            return Err(OpError::BadStepProof("program larger than memory".into()));
        }
        memory[..program.len()].copy_from_slice(program);
        for (addr, v) in data {
            *memory.get_mut(*addr as usize).ok_or_else(|| OpError::BadStepProof(format!("address {addr} outside memory")))? =
                *v;
        }
        let leaves: Vec<[u8; 8]> = memory.iter().map(|v| v.to_be_bytes()).collect();
        let tree = MerkleTree::build(&leaves)?;
        Ok(Self { pc: 0, regs: [0; REGISTERS], memory, tree })
    }

    pub fn state(&self) -> VmState {
        VmState { pc: self.pc, regs: self.regs, memory_root: self.tree.root() }
    }

    pub fn memory(&self, addr: u64) -> Option<u64> {
        self.memory.get(addr as usize).copied()
    }

    fn prove(&self, addr: u64) -> Result<ProvenCell, OpError> {
        let value = *self.memory.get(addr as usize).ok_or_else(|| OpError::BadStepProof(format!("address {addr} outside memory")))?;
        Ok(ProvenCell { addr, value, proof: self.tree.prove(addr as usize)? })
    }

    /// Cells the next instruction reads or writes.
    pub fn witness(&self) -> Result<StepWitness, OpError> {
        let word = self.memory.get(self.pc as usize).copied().ok_or(OpError::IllegalInstruction(self.pc))?;
        let ins = Instruction::decode(word)?;
        let mut addrs = vec![self.pc];
        let base = |ins: &Instruction| effective_addr(self.regs[ins.rs as usize], ins.imm);
        match ins.op {
            Opcode::Load | Opcode::Store => addrs.push(base(&ins)?),
            Opcode::LoadPre => {
                let b = base(&ins)?;
                for i in 0..4 {
                    addrs.push(effective_addr(b, i)?);
                }
            }
            _ => {}
        }
        addrs.dedup();
        Ok(StepWitness { cells: addrs.into_iter().map(|a| self.prove(a)).collect::<Result<_, _>>()? })
    }

    /// One step through the same code path the on-chain check uses.
    pub fn step(&mut self, preimages: &PreimageOracle) -> Result<(), OpError> {
        let pre = self.state();
        let post = vm_step(&pre, &self.witness()?, preimages)?;
        if post.memory_root != pre.memory_root {
            let ins = Instruction::decode(self.memory[self.pc as usize])?;
            let addr = effective_addr(self.regs[ins.rs as usize], ins.imm)?;
            let v = self.regs[ins.rt as usize];
            self.memory[addr as usize] = v;
            self.tree.update(addr as usize, &v.to_be_bytes())?;
            debug_assert_eq!(self.tree.root(), post.memory_root);
        }
        self.pc = post.pc;
        self.regs = post.regs;
        Ok(())
    }
}

/// Every state of a run of exactly `length` steps, halting in place once
/// the program stops.
#[derive(Debug, Clone)]
pub struct Trace {
    initial: Machine,
    states: Vec<VmState>,
    preimages: PreimageOracle,
}

impl Trace {
    pub fn run(machine: Machine, length: u64, preimages: PreimageOracle) -> Result<Self, OpError> {
        let initial = machine.clone();
        let mut m = machine;
        let mut states = vec![m.state()];
        for _ in 0..length {
            m.step(&preimages)?;
            states.push(m.state());
        }
        Ok(Self { initial, states, preimages })
    }

    pub fn length(&self) -> u64 {
        self.states.len() as u64 - 1
    }

    pub fn state(&self, i: u64) -> Option<&VmState> {
        self.states.get(i as usize)
    }

    pub fn final_state(&self) -> &VmState {
        self.states.last().unwrap()
    }

    pub fn preimages(&self) -> &PreimageOracle {
        &self.preimages
    }

    /// Machine as it stands before step `i`.
    pub fn machine_at(&self, i: u64) -> Result<Machine, OpError> {
        let mut m = self.initial.clone();
        for _ in 0..i.min(self.length()) {
            m.step(&self.preimages)?;
        }
        Ok(m)
    }

    /// Proof material for executing step `i → i + 1` on chain.
    pub fn step_proof(&self, i: u64) -> Result<(VmState, StepWitness), OpError> {
        let m = self.machine_at(i)?;
        Ok((m.state(), m.witness()?))
    }
}

/// Memory layout used by [`fold_program`].
pub mod layout {
    pub const KEY: u64 = 128;
    pub const COUNT: u64 = 132;
    pub const MULTIPLIER: u64 = 133;
    pub const RESULT: u64 = 135;
}

pub const FOLD_MULTIPLIER: u64 = 31;

/// Program folding the words of one preimage as `acc = acc·31 + wᵢ` and
/// storing `acc` at [`layout::RESULT`]. Stands in for the state-transition
/// program whose execution a dispute is about.
pub fn fold_program() -> Vec<u64> {
    use Opcode::*;
    let i = Instruction::new;
    [
        i(Load, 3, 0, 0, layout::COUNT as i32),
        i(Load, 5, 0, 0, layout::MULTIPLIER as i32),
        i(JumpZ, 0, 3, 0, 9),
        i(LoadPre, 4, 0, 2, layout::KEY as i32),
        i(Mul, 1, 1, 5, 0),
        i(Add, 1, 1, 4, 0),
        i(Add, 2, 2, 0, 1),
        i(Add, 3, 3, 0, -1),
        i(JumpZ, 0, 0, 0, 2),
        i(Store, 0, 0, 1, layout::RESULT as i32),
        i(Halt, 0, 0, 0, 0),
    ]
    .iter()
    .map(Instruction::encode)
    .collect()
}

/// Steps [`fold_program`] needs to halt on `n` words.
pub fn fold_steps(n: u64) -> u64 {
    2 + 7 * n + 1 + 1
}

/// Machine ready to fold `input`, with the input registered as a preimage.
pub fn fold_machine(input: &[u8], preimages: &mut PreimageOracle) -> Result<Machine, OpError> {
    let key = preimages.register(input.to_vec());
    let n = input.len().div_ceil(8) as u64;
    let mut data: Vec<(u64, u64)> = (0..4).map(|i| (layout::KEY + i, u64::from_be_bytes(key.0[i as usize * 8..][..8].try_into().unwrap()))).collect();
    data.push((layout::COUNT, n));
    data.push((layout::MULTIPLIER, FOLD_MULTIPLIER));
    Machine::new(&fold_program(), &data)
}

/// Plain-Rust result of the fold, for checking traces.
pub fn fold_words(input: &[u8]) -> u64 {
    input.chunks(8).fold(0u64, |acc, c| {
        let mut w = [0u8; 8];
        w[..c.len()].copy_from_slice(c);
        acc.wrapping_mul(FOLD_MULTIPLIER).wrapping_add(u64::from_be_bytes(w))
    })
}
