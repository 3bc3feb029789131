//! Rounds, sifting and timed acquisition sessions.

mod counts;
mod round;
mod session;

pub use counts::CountTable;
pub use round::{
    sift, simulate_round, simulate_round_with, Announcement, ClickCause, Outcome, RoundRecord, SettingPolicy,
    SiftClass,
};
pub use session::{
    run_session, BitString, CarrierCounts, EveCounts, Session, SessionTally, SettingCounts, SiftCounts,
};
