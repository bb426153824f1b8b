//! Best-effort CPU pinning: one worker and its I/O thread per core, on
//! separate hyperthreads when the topology exposes them.

#[derive(Debug, Clone, Copy)]
pub(crate) struct CorePlan {
    pub worker_cpu: usize,
    pub io_cpu: usize,
}

/// Map workers onto CPUs round-robin. When a CPU lists a hyperthread
/// sibling, the I/O thread goes there; otherwise it shares the core.
pub(crate) fn plan(workers: usize) -> Vec<CorePlan> {
    let cpus = available_cpus();
    (0..workers)
        .map(|w| {
            let cpu = cpus[w % cpus.len()];
            let io_cpu = sibling_of(cpu).unwrap_or(cpu);
            CorePlan {
                worker_cpu: cpu,
                io_cpu,
            }
        })
        .collect()
}

fn available_cpus() -> Vec<usize> {
    let n = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    (0..n).collect()
}

/// First other entry of the CPU's thread_siblings_list, if any.
fn sibling_of(cpu: usize) -> Option<usize> {
    let path = format!("/sys/devices/system/cpu/cpu{cpu}/topology/thread_siblings_list");
    let text = std::fs::read_to_string(path).ok()?;
    for part in text.trim().split(',') {
        let part = part.trim();
        let ids: Vec<usize> = if let Some((a, b)) = part.split_once('-') {
            let (a, b) = (a.parse().ok()?, b.parse().ok()?);
            (a..=b).collect()
        } else {
            vec![part.parse().ok()?]
        };
        for id in ids {
            if id != cpu {
                return Some(id);
            }
        }
    }
    None
}

/// Pin the calling thread to `cpu`. Failures degrade to unpinned with a
/// warning.
pub(crate) fn pin_current_thread(cpu: usize) {
    #[cfg(target_os = "linux")]
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_ZERO(&mut set);
        libc::CPU_SET(cpu, &mut set);
        let rc = libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set);
        if rc != 0 {
            log::warn!(
                "pinning to cpu {cpu} failed ({}); running unpinned",
                std::io::Error::last_os_error()
            );
        }
    }
    #[cfg(not(target_os = "linux"))]
    {
        let _ = cpu;
        log::warn!("thread pinning unsupported on this platform; running unpinned");
    }
}
