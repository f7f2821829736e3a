use std::time::Duration;

use serde::{Serialize, Serializer};
use serde_json::{Map, Value};

use super::ExportError;
use crate::interlayer::BlockPoint;
use crate::voxel::{Block, VoxelGrid};

pub const DEFAULT_ENDPOINT: &str = "http://localhost:9000";
pub const DEFAULT_BATCH_SIZE: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpPlacement {
    pub endpoint: String,
    pub offset: BlockPoint,
    pub batch_size: usize,
    /// Swap the y and z components of the offset, matching the argument
    /// order some GDPC-based scripts use.
    pub gdpc_axes: bool,
}

impl Default for HttpPlacement {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_ENDPOINT.into(),
            offset: BlockPoint::ORIGIN,
            batch_size: DEFAULT_BATCH_SIZE,
            gdpc_axes: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlacementFailure {
    #[serde(serialize_with = "as_triple")]
    pub point: BlockPoint,
    pub reason: String,
}

fn as_triple<S: Serializer>(p: &BlockPoint, s: S) -> Result<S::Ok, S::Error> {
    p.coords().serialize(s)
}

/// `sent == acknowledged + failed.len()`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PlacementBatchResult {
    pub sent: usize,
    pub acknowledged: usize,
    pub requests: usize,
    pub failed: Vec<PlacementFailure>,
}

/// Accepts `host:port` as well as a full URL.
pub fn normalize_endpoint(endpoint: &str) -> String {
    let e = endpoint.trim().trim_end_matches('/');
    if e.contains("://") {
        e.to_owned()
    } else {
        format!("http://{e}")
    }
}

/// Request body for one batch: `[{"id":..,"x":..,"y":..,"z":..,"state":{..}}]`.
pub fn placement_body(blocks: &[(BlockPoint, &Block)]) -> String {
    let items: Vec<Value> = blocks
        .iter()
        .map(|(p, b)| {
            let mut obj = Map::new();
            obj.insert("id".into(), b.material.namespaced().into());
            obj.insert("x".into(), p.x.into());
            obj.insert("y".into(), p.y.into());
            obj.insert("z".into(), p.z.into());
            if !b.state.is_empty() {
                obj.insert("state".into(), b.state.to_json());
            }
            Value::Object(obj)
        })
        .collect();
    serde_json::to_string(&items).expect("json")
}

fn ack_of(entry: &Value) -> Result<(), String> {
    let ok = match entry.get("status") {
        Some(Value::Bool(b)) => *b,
        Some(v) => v.as_i64() == Some(1),
        None => false,
    };
    if ok {
        Ok(())
    } else {
        Err(entry
            .get("message")
            .and_then(Value::as_str)
            .map_or_else(|| format!("rejected: {entry}"), str::to_owned))
    }
}

/// Sends the grid in `(y, z, x)` order, `batch_size` blocks per request,
/// one request at a time. A failed batch marks its blocks failed and the
/// remaining batches are still sent.
pub fn place_via_http(grid: &VoxelGrid, target: &HttpPlacement) -> Result<PlacementBatchResult, ExportError> {
    if target.batch_size == 0 {
        return Err(ExportError::ZeroBatchSize);
    }
    let base = normalize_endpoint(&target.endpoint);
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(30)))
        .http_status_as_error(false)
        .build()
        .into();

    let unreachable = |reason: String| ExportError::EndpointUnreachable { endpoint: base.clone(), reason };
    let version = agent.get(&format!("{base}/version")).call().map_err(|e| unreachable(e.to_string()))?;
    if !version.status().is_success() {
        return Err(unreachable(format!("GET /version answered {}", version.status().as_u16())));
    }

    let o = target.offset;
    let (oy, oz) = if target.gdpc_axes { (o.z, o.y) } else { (o.y, o.z) };
    let url = format!("{base}/blocks?x={}&y={oy}&z={oz}", o.x);

    let blocks: Vec<(BlockPoint, &Block)> = grid.iter_blocks().collect();
    let mut result = PlacementBatchResult::default();
    for batch in blocks.chunks(target.batch_size) {
        result.sent += batch.len();
        result.requests += 1;
        let acks = send_batch(&agent, &url, batch);
        for (i, (p, _)) in batch.iter().enumerate() {
            match &acks {
                Ok(list) => match list.get(i).map(ack_of) {
                    Some(Ok(())) => result.acknowledged += 1,
                    Some(Err(reason)) => result.failed.push(PlacementFailure { point: *p, reason }),
                    None => result.failed.push(PlacementFailure { point: *p, reason: "no acknowledgement".into() }),
                },
                Err(reason) => result.failed.push(PlacementFailure { point: *p, reason: reason.clone() }),
            }
        }
    }
    Ok(result)
}

fn send_batch(agent: &ureq::Agent, url: &str, batch: &[(BlockPoint, &Block)]) -> Result<Vec<Value>, String> {
    let mut resp = agent
        .put(url)
        .header("Content-Type", "application/json")
        .send(placement_body(batch))
        .map_err(|e| e.to_string())?;
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
    if !(200..300).contains(&status) {
        return Err(format!("HTTP {status}"));
    }
    match serde_json::from_str(&text) {
        Ok(Value::Array(list)) => Ok(list),
        _ => Err("unreadable acknowledgement".into()),
    }
}
