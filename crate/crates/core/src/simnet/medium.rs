use std::collections::BTreeSet;

use crate::bcast::{BroadcastOracle, BroadcastPayload, BroadcastTag};
use crate::events::Event;
use crate::ledger::{CostLedger, Stage};
use crate::protocol::{Medium, SendObligation};
use crate::rs_codec::MacroSymbol;
use crate::simnet::AdversaryScript;
use crate::ProcessorId;

/// Synchronous network with an omniscient scheduler: applies the adversary
/// script to faulty senders, charges the ledger and records every event.
pub struct SimMedium<'a> {
    faulty: &'a BTreeSet<ProcessorId>,
    script: &'a AdversaryScript,
    oracle: BroadcastOracle,
    sym_bytes: usize,
    pub ledger: CostLedger,
    pub events: Vec<Event>,
}

impl<'a> SimMedium<'a> {
    pub fn new(
        faulty: &'a BTreeSet<ProcessorId>,
        script: &'a AdversaryScript,
        oracle: BroadcastOracle,
        sym_bytes: usize,
    ) -> Self {
        Self {
            faulty,
            script,
            oracle,
            sym_bytes,
            ledger: CostLedger::new(),
            events: Vec::new(),
        }
    }
}

impl Medium for SimMedium<'_> {
    fn send(
        &mut self,
        generation: u64,
        ob: &SendObligation,
        value: Option<MacroSymbol>,
    ) -> Option<MacroSymbol> {
        let delivered = match self.script.behavior(ob.sender) {
            Some(b) if self.faulty.contains(&ob.sender) => {
                b.apply_p2p(generation, ob, value, self.sym_bytes)
            }
            _ => value,
        };
        if let Some(sym) = &delivered {
            self.ledger
                .charge_p2p(generation, Stage::Matching, 8 * sym.len() as u64);
            self.events.push(Event::SymbolSent {
                generation,
                step: ob.step,
                sender: ob.sender,
                receiver: ob.receiver,
                slot: ob.slot,
                symbol: Some(sym.clone()),
            });
        }
        delivered
    }

    fn broadcast(
        &mut self,
        generation: u64,
        sender: ProcessorId,
        tag: BroadcastTag,
        payload: BroadcastPayload,
    ) -> BroadcastPayload {
        let payload = match self.script.behavior(sender) {
            Some(b) if self.faulty.contains(&sender) => {
                b.apply_broadcast(generation, tag, payload, self.sym_bytes)
            }
            _ => payload,
        };
        let record = self
            .oracle
            .broadcast(&mut self.ledger, generation, sender, tag, payload);
        let seen = record.payload.clone();
        self.events.push(Event::Broadcast(record));
        seen
    }

    fn emit(&mut self, event: Event) {
        self.events.push(event);
    }
}
