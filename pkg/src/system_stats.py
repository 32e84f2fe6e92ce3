"""Host resource snapshot recorded in run manifests."""

import os
import platform
import time
from datetime import datetime
from typing import Dict, Any

import psutil


def get_system_stats() -> Dict[str, Any]:
    """Get current system resource usage.

    Returns:
        Dict with cpu_count, cpu_percent, memory_percent, process_rss_mb,
        python, platform, system_time, and load_average (Unix only).
    """
    process = psutil.Process()
    stats = {
        "cpu_count": psutil.cpu_count(logical=True),
        "cpu_percent": psutil.cpu_percent(interval=0.1),
        "memory_percent": psutil.virtual_memory().percent,
        "process_rss_mb": round(process.memory_info().rss / 2 ** 20, 1),
        "uptime_seconds": round(time.time() - psutil.boot_time(), 1),
        "python": platform.python_version(),
        "platform": platform.platform(),
        "system_time": datetime.now().strftime("%Y-%m-%d %H:%M:%S"),
    }

    if hasattr(os, 'getloadavg'):
        load_avg = os.getloadavg()
        stats["load_average"] = {
            "1min": round(load_avg[0], 2),
            "5min": round(load_avg[1], 2),
            "15min": round(load_avg[2], 2),
        }

    return stats


def process_memory_mb() -> float:
    """Resident memory of this process in MiB."""
    return round(psutil.Process().memory_info().rss / 2 ** 20, 1)
