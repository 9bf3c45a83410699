use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub const DEFAULT_LOG_CAPACITY: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Outcome {
    Ok,
    ClientFault,
    ServerFault,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RequestLogEntry {
    pub timestamp: DateTime<Utc>,
    pub service_name: String,
    pub method_name: String,
    pub duration_micros: u64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceMetrics {
    pub count: usize,
    /// Mean duration, rounded to the nearest microsecond.
    pub mean_duration_micros: u64,
    /// Share of entries whose outcome is not `Ok`.
    pub fault_rate: f64,
}

/// Fixed-size ring of the most recent requests.
#[derive(Debug)]
pub struct RequestLog {
    capacity: usize,
    entries: Mutex<VecDeque<RequestLogEntry>>,
}

impl RequestLog {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        RequestLog { capacity, entries: Mutex::new(VecDeque::with_capacity(capacity)) }
    }

    pub fn append(&self, entry: RequestLogEntry) {
        let mut entries = self.entries.lock().unwrap_or_else(|p| p.into_inner());
        if entries.len() == self.capacity {
            entries.pop_front();
        }
        entries.push_back(entry);
    }

    pub fn entries(&self) -> Vec<RequestLogEntry> {
        self.entries.lock().unwrap_or_else(|p| p.into_inner()).iter().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn summary(&self) -> BTreeMap<String, ServiceMetrics> {
        let mut acc: BTreeMap<String, (usize, u128, usize)> = BTreeMap::new();
        for e in self.entries() {
            let slot = acc.entry(e.service_name).or_default();
            slot.0 += 1;
            slot.1 += e.duration_micros as u128;
            if e.outcome != Outcome::Ok {
                slot.2 += 1;
            }
        }
        acc.into_iter()
            .map(|(name, (count, total, faults))| {
                let n = count as u128;
                let metrics = ServiceMetrics {
                    count,
                    mean_duration_micros: ((total + n / 2) / n) as u64,
                    fault_rate: faults as f64 / count as f64,
                };
                (name, metrics)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(service: &str, micros: u64, outcome: Outcome) -> RequestLogEntry {
        RequestLogEntry {
            timestamp: Utc::now(),
            service_name: service.into(),
            method_name: "m".into(),
            duration_micros: micros,
            outcome,
        }
    }

    #[test]
    fn mean_and_fault_rate() {
        let log = RequestLog::new(8);
        log.append(entry("S", 100, Outcome::Ok));
        log.append(entry("S", 200, Outcome::ClientFault));
        log.append(entry("S", 300, Outcome::Ok));
        let s = log.summary();
        assert_eq!(s["S"].count, 3);
        assert_eq!(s["S"].mean_duration_micros, 200);
        assert!((s["S"].fault_rate - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_log_empty_summary() {
        assert!(RequestLog::new(4).summary().is_empty());
    }

    #[test]
    fn ring_evicts_oldest() {
        let log = RequestLog::new(3);
        for i in 0..4 {
            log.append(entry("S", i, Outcome::Ok));
        }
        let durations: Vec<u64> = log.entries().iter().map(|e| e.duration_micros).collect();
        assert_eq!(durations, vec![1, 2, 3]);
    }

    #[test]
    fn mean_matches_brute_force_within_rounding() {
        let log = RequestLog::new(64);
        let values = [1u64, 2, 2, 7, 1000, 13, 0, 5];
        for v in values {
            log.append(entry("S", v, Outcome::Ok));
        }
        let exact = values.iter().sum::<u64>() as f64 / values.len() as f64;
        let got = log.summary()["S"].mean_duration_micros as f64;
        assert!((got - exact).abs() <= 0.5);
    }
}
