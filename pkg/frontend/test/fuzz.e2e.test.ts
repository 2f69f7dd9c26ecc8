/** End-to-end interaction fuzz against a real service process.
 *
 * Each fuzzed sequence drives a fresh BallotSession exactly the way the page
 * does: only enabled controls are ever operated. Every sequence ends in a
 * submission, and the service must accept all of them; a single 422 means
 * the client let an illegal ballot through.
 */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import net from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { submitBallot, fetchSpec } from "../src/api.js";
import { BallotSession } from "../src/session.js";

const SPEC_WIRE = {
  areas: [
    // alpha has one 10,000-cent step of floor room, beta five, gamma none
    { id: "alpha", name: "Alpha services", baseline_cents: 200_000 },
    { id: "beta", name: "Beta services", baseline_cents: 1_000_000 },
    { id: "gamma", name: "Gamma services", baseline_cents: 5_000 },
  ],
  increment_cents: 10_000,
  floor_fraction: 0.05,
  fee_categories: ["clerk", "pool"],
  demographic_axes: [{ id: "tenure", categories: ["own", "rent"] }],
};

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = net.createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address && typeof address === "object") {
        const port = address.port;
        srv.close(() => resolve(port));
      } else {
        srv.close(() => reject(new Error("no port assigned")));
      }
    });
    srv.on("error", reject);
  });
}

interface Service {
  baseUrl: string;
  child: ChildProcess;
  stderr: string[];
}

async function startService(mode: "delta" | "likert"): Promise<Service> {
  const dir = mkdtempSync(join(tmpdir(), "ballot-ui-e2e-"));
  writeFileSync(join(dir, "spec.json"), JSON.stringify(SPEC_WIRE));
  const port = await freePort();
  writeFileSync(
    join(dir, "config.json"),
    JSON.stringify({ spec: "spec.json", mode, admin_token: "e2e", port, token_seed: 1 }),
  );

  const child = spawn(
    "python3",
    ["-m", "civicbudget.cli", "serve", "--config", join(dir, "config.json")],
    { stdio: ["ignore", "ignore", "pipe"] },
  );
  const stderr: string[] = [];
  child.stderr?.on("data", (chunk: Buffer) => stderr.push(chunk.toString()));
  let spawnError: Error | null = null;
  child.on("error", (err) => {
    spawnError = err;
  });

  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 30_000;
  while (Date.now() < deadline) {
    if (spawnError !== null || child.exitCode !== null) break;
    try {
      const res = await fetch(`${baseUrl}/healthz`);
      if (res.ok) return { baseUrl, child, stderr };
    } catch {
      // not listening yet
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  child.kill();
  throw new Error(
    "the collection service never came up; is the Python package installed " +
      "(pip install -e . in the repository root)?\n" +
      (spawnError ? `spawn: ${spawnError}\n` : "") +
      stderr.join(""),
  );
}

async function responsesCount(baseUrl: string): Promise<number> {
  const res = await fetch(`${baseUrl}/healthz`);
  return ((await res.json()) as { responses: number }).responses;
}

const services: Service[] = [];
afterAll(() => {
  for (const svc of services) svc.child.kill();
});

describe("interaction fuzz, allocation mode", () => {
  it(
    "1000 random interaction sequences, zero server-side rejections",
    async () => {
      const svc = await startService("delta");
      services.push(svc);
      const spec = await fetchSpec(svc.baseUrl);
      expect(spec.mode).toBe("delta");

      const sessions: BallotSession[] = [];
      for (let seq = 0; seq < 1000; seq++) {
        const rand = mulberry32(0xb0_0000 + seq);
        const session = new BallotSession(spec);
        const ids = spec.areas.map((a) => a.id);

        const moves = Math.floor(rand() * 61);
        for (let m = 0; m < moves; m++) {
          const roll = rand();
          if (roll < 0.7) {
            // stepper click: only an enabled control can be operated
            const id = ids[Math.floor(rand() * ids.length)]!;
            const dir = rand() < 0.5 ? 1 : -1;
            if (dir > 0 ? session.canIncrease(id) : session.canDecrease(id)) {
              session.adjust(id, dir);
            }
          } else if (roll < 0.8) {
            const cat = spec.feeCategories[Math.floor(rand() * spec.feeCategories.length)]!;
            session.setFee(cat, Math.floor(rand() * 3));
          } else if (roll < 0.9) {
            session.setTax(Math.floor(rand() * 3) - 1);
          } else {
            const axis = spec.demographicAxes[0]!;
            session.setDemographic(
              axis.id,
              axis.categories[Math.floor(rand() * axis.categories.length)]!,
            );
          }
        }

        // walk back to balance through enabled controls only
        while (session.unallocatedCents !== 0) {
          if (session.unallocatedCents > 0) {
            session.adjust(ids[Math.floor(rand() * ids.length)]!, 1);
          } else {
            const candidates = ids.filter((id) => session.canDecrease(id));
            expect(candidates.length).toBeGreaterThan(0);
            session.adjust(candidates[Math.floor(rand() * candidates.length)]!, -1);
          }
        }
        for (const cat of spec.feeCategories) {
          if (session.feeLevel(cat) === null) session.setFee(cat, Math.floor(rand() * 3));
        }
        if (session.taxLevel === null) session.setTax(Math.floor(rand() * 3) - 1);

        expect(session.canSubmit).toBe(true);
        sessions.push(session);
      }

      let rejections = 0;
      let accepted = 0;
      const batch = 25;
      for (let at = 0; at < sessions.length; at += batch) {
        const results = await Promise.all(
          sessions
            .slice(at, at + batch)
            .map((s) => submitBallot(svc.baseUrl, s.answers())),
        );
        for (const result of results) {
          if (result.kind === "rejected") {
            rejections += 1;
          } else if (result.kind === "accepted") {
            expect(result.receiptId).toMatch(/^\d{6}-[0-9a-f]{10}$/);
            accepted += 1;
          } else {
            throw new Error(`unexpected submit outcome: ${JSON.stringify(result)}`);
          }
        }
      }

      expect(rejections).toBe(0);
      expect(accepted).toBe(1000);
      expect(await responsesCount(svc.baseUrl)).toBe(1000);
    },
    180_000,
  );
});

describe("interaction fuzz, five-point mode", () => {
  it(
    "radio-scale sessions submit clean with no balance gate",
    async () => {
      const svc = await startService("likert");
      services.push(svc);
      const spec = await fetchSpec(svc.baseUrl);
      expect(spec.mode).toBe("likert");

      for (let seq = 0; seq < 30; seq++) {
        const rand = mulberry32(0x11_0000 + seq);
        const session = new BallotSession(spec);
        for (const area of spec.areas) {
          session.setFivePoint(area.id, Math.floor(rand() * 5) - 2);
        }
        for (const cat of spec.feeCategories) session.setFee(cat, Math.floor(rand() * 3));
        session.setTax(Math.floor(rand() * 3) - 1);
        if (rand() < 0.5) session.setDemographic("tenure", rand() < 0.5 ? "own" : "rent");

        expect(session.canSubmit).toBe(true);
        const result = await submitBallot(svc.baseUrl, session.answers());
        expect(result.kind).toBe("accepted");
      }
      expect(await responsesCount(svc.baseUrl)).toBe(30);
    },
    120_000,
  );
});
