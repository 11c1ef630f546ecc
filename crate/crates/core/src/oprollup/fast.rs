//! Fast withdrawals. An off-chain oracle watches L2 and signs the hash of a
//! withdrawal it has seen sent; the bridge lends the withdrawn value at once
//! and is repaid when the portal finalizes the withdrawal, whose target is
//! the bridge itself.

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::l2::{L2State, WithdrawalTx};
use super::OpError;
use crate::l1sim::abi::{selector, Decoder, Encoder};
use crate::l1sim::{CallContext, Handler, L1Chain, Revert};
use crate::primitives::{keccak_concat, Address, B256};
use crate::proofs::{schnorr_fs_prove, schnorr_fs_verify, SchnorrGroup, SchnorrKeyPair, SchnorrSignature};

pub const LOAN_OPENED_EVENT: &str = "LoanOpened";
pub const LOAN_CLOSED_EVENT: &str = "LoanClosed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attestation {
    pub withdrawal_hash: B256,
    pub signature: SchnorrSignature,
}

/// Off-chain watcher holding the signing key the bridge trusts.
pub struct FastOracle {
    group: SchnorrGroup,
    keys: SchnorrKeyPair,
}

impl FastOracle {
    pub fn new(rng: &mut dyn RngCore) -> Self {
        let group = SchnorrGroup::large();
        Self { keys: SchnorrKeyPair::generate(&group, rng), group }
    }

    pub fn public_key(&self) -> u64 {
        self.keys.public
    }

    /// Signs `w` only if the L2 state shows it as sent.
    pub fn attest(&self, l2: &L2State, w: &WithdrawalTx, rng: &mut dyn RngCore) -> Result<Attestation, OpError> {
        let withdrawal_hash = w.hash();
        if !l2.is_sent(&withdrawal_hash) {
            return Err(OpError::AttestationMismatch);
        }
        let signature = schnorr_fs_prove(&self.group, &self.keys, withdrawal_hash.as_bytes(), rng);
        Ok(Attestation { withdrawal_hash, signature })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Loan {
    pub withdrawal_hash: B256,
    pub recipient: Address,
    pub principal: u128,
    pub interest: u128,
    pub opened_at: u64,
    pub closed_at: Option<u64>,
}

/// Liquidity pool lending against attested withdrawals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FastBridge {
    pub portal: Address,
    pub oracle_public: u64,
    pub interest_bps: u128,
    /// Keyed by `keccak(recipient ‖ salt)`, the only handle the repayment
    /// call carries.
    pub loans: BTreeMap<B256, Loan>,
}

fn loan_key(recipient: &Address, salt: &B256) -> B256 {
    keccak_concat([recipient.as_bytes(), salt.as_bytes()])
}

impl FastBridge {
    pub fn new(portal: Address, oracle_public: u64, interest_bps: u128) -> Self {
        Self { portal, oracle_public, interest_bps, loans: BTreeMap::new() }
    }

    /// Deploys at `at` with `liquidity` supplied from `funder`.
    pub fn deploy(chain: &mut L1Chain, at: Address, bridge: FastBridge, funder: Address, liquidity: u128) -> Result<(), OpError> {
        chain.deploy(at, bridge)?;
        let r = chain.submit_tx(funder, at, Encoder::call("provideLiquidity").finish(), liquidity)?;
        match r.revert_reason() {
            Some(reason) => Err(OpError::Reverted(reason.to_owned())),
            None => Ok(()),
        }
    }

    pub fn interest(&self, principal: u128) -> u128 {
        principal * self.interest_bps / 10_000
    }

    /// Withdrawal data that repays the loan for `(recipient, salt)`.
    pub fn close_calldata(recipient: Address, salt: B256) -> Vec<u8> {
        Encoder::call("closeLoan").address(recipient).b256(salt).finish()
    }

    pub fn request_calldata(w: &WithdrawalTx, a: &Attestation) -> Vec<u8> {
        Encoder::call("requestLoan")
            .u64(w.nonce)
            .address(w.sender)
            .address(w.target)
            .u128(w.value)
            .u64(w.gas_limit)
            .bytes(&w.data)
            .b256(a.withdrawal_hash)
            .u64(a.signature.h)
            .u64(a.signature.s)
            .finish()
    }

    pub fn loan(&self, recipient: &Address, salt: &B256) -> Option<&Loan> {
        self.loans.get(&loan_key(recipient, salt))
    }

    fn check(&self, me: Address, w: &WithdrawalTx, a: &Attestation) -> Result<(Address, B256), OpError> {
        if !schnorr_fs_verify(&SchnorrGroup::large(), self.oracle_public, a.withdrawal_hash.as_bytes(), &a.signature) {
            return Err(OpError::UntrustedOracle);
        }
        if a.withdrawal_hash != w.hash() || w.target != me {
            return Err(OpError::AttestationMismatch);
        }
        let (sel, mut d) = Decoder::call(&w.data).map_err(|_| OpError::AttestationMismatch)?;
        if sel != selector("closeLoan") {
            return Err(OpError::AttestationMismatch);
        }
        let recipient = d.address()?;
        let salt = d.b256()?;
        d.finish()?;
        Ok((recipient, salt))
    }

    fn request(&mut self, ctx: &mut CallContext<'_>, w: WithdrawalTx, a: Attestation) -> Result<(), Revert> {
        let (recipient, salt) = self.check(ctx.address(), &w, &a)?;
        let key = loan_key(&recipient, &salt);
        if self.loans.contains_key(&key) {
            return Err(Revert::new("loan already issued"));
        }
        let interest = self.interest(w.value);
        let payout = w.value - interest;
        if ctx.balance(&ctx.address()) < payout {
            return Err(OpError::InsufficientLiquidity.into());
        }
        ctx.transfer(recipient, payout)?;
        let loan = Loan {
            withdrawal_hash: a.withdrawal_hash,
            recipient,
            principal: w.value,
            interest,
            opened_at: ctx.timestamp(),
            closed_at: None,
        };
        self.loans.insert(key, loan);
        ctx.emit(LOAN_OPENED_EVENT, Encoder::new().b256(a.withdrawal_hash).address(recipient).u128(payout).finish());
        Ok(())
    }

    fn close(&mut self, ctx: &mut CallContext<'_>, recipient: Address, salt: B256) -> Result<(), Revert> {
        if ctx.caller() != self.portal {
            return Err(OpError::Unauthorized(ctx.caller()).into());
        }
        let now = ctx.timestamp();
        let loan = self.loans.get_mut(&loan_key(&recipient, &salt)).ok_or_else(|| Revert::new("no such loan"))?;
        if loan.closed_at.is_some() {
            return Err(Revert::new("loan already closed"));
        }
        if ctx.value() < loan.principal {
            return Err(Revert::new("repayment below principal"));
        }
        loan.closed_at = Some(now);
        ctx.emit(LOAN_CLOSED_EVENT, Encoder::new().b256(loan.withdrawal_hash).finish());
        Ok(())
    }
}

impl Handler for FastBridge {
    fn call(&mut self, ctx: &mut CallContext<'_>, data: &[u8]) -> Result<Vec<u8>, Revert> {
        let (sel, mut d) = Decoder::call(data)?;
        if sel == selector("provideLiquidity") {
            d.finish()?;
        } else if sel == selector("requestLoan") {
            let w = WithdrawalTx {
                nonce: d.u64()?,
                sender: d.address()?,
                target: d.address()?,
                value: d.u128()?,
                gas_limit: d.u64()?,
                data: d.bytes()?,
            };
            let a = Attestation { withdrawal_hash: d.b256()?, signature: SchnorrSignature { h: d.u64()?, s: d.u64()? } };
            d.finish()?;
            self.request(ctx, w, a)?;
        } else if sel == selector("closeLoan") {
            let (recipient, salt) = (d.address()?, d.b256()?);
            d.finish()?;
            self.close(ctx, recipient, salt)?;
        } else {
            return Err(Revert::new("unknown function selector"));
        }
        Ok(Vec::new())
    }
}
