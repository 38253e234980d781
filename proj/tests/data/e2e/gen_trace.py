#!/usr/bin/env python3
# Copyright 2026 The sysfault Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes trace.csv: two minutes of a small mail server's syscalls.

Eight 15 s intervals. Natural errors per interval:
  read   EAGAIN     fluctuating share of 450 calls (see READ_FAIL_SHARE)
  futex  ETIMEDOUT  every third of 225 calls, a steady 1/3
  stat   ENOENT     a single failure in interval 3 of 75 calls
  write  none
"""
import random
import sys

SEED = 20261015
ORIGIN_NS = 1_700_000_000_000_000_000
PID = 4100
COMM = "mailsrv"
SECONDS = 120
PER_SECOND = {"read": 30, "write": 15, "futex": 15, "stat": 5}
READ_FAIL_SHARE = [0.02, 0.20, 0.06, 0.16, 0.04, 0.12, 0.10, 0.08]
EAGAIN, ENOENT, ETIMEDOUT = 11, 2, 110


def main(path):
    rng = random.Random(SEED)
    events = []
    for second in range(SECONDS):
        for syscall, n in PER_SECOND.items():
            for _ in range(n):
                ts = ORIGIN_NS + second * 1_000_000_000 + rng.randrange(1_000_000_000)
                events.append([ts, syscall])
    events.sort()
    events[0][0] = ORIGIN_NS  # intervals are aligned to the first event

    by_interval = {}
    for e in events:
        by_interval.setdefault(((e[0] - ORIGIN_NS) // 15_000_000_000, e[1]), []).append(e)

    rets = {}
    for (interval, syscall), calls in by_interval.items():
        for k, e in enumerate(calls):
            rets[id(e)] = {"read": 512, "write": 256, "futex": 0, "stat": 0}[syscall]
        if syscall == "read":
            failing = rng.sample(range(len(calls)), round(READ_FAIL_SHARE[interval] * len(calls)))
            for k in failing:
                rets[id(calls[k])] = -EAGAIN
        elif syscall == "futex":
            for k in range(2, len(calls), 3):
                rets[id(calls[k])] = -ETIMEDOUT
        elif syscall == "stat" and interval == 3:
            rets[id(calls[rng.randrange(len(calls))])] = -ENOENT

    with open(path, "w") as out:
        out.write("timestamp_ns,pid,comm,syscall,ret,duration_ns\n")
        for e in events:
            out.write(f"{e[0]},{PID},{COMM},{e[1]},{rets[id(e)]},{rng.randrange(500, 50_000)}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "trace.csv")
