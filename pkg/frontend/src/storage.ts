/** Document persistence over browser local storage (or any key-value shim).
 *
 * Documents are stored under a per-name key plus one index key listing the
 * saved names; the stored format keeps editor-only state (lock flags) that
 * the engine layout format deliberately drops.
 */

import type { CanvasDocument, StoredDocumentJson } from "./document.js";
import { documentFromJson, documentToJson } from "./document.js";
import { ParseError } from "./errors.js";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class DocumentStore {
  private readonly storage: StorageLike;
  private readonly prefix: string;

  constructor(storage: StorageLike, prefix = "layoutgen") {
    this.storage = storage;
    this.prefix = prefix;
  }

  private get indexKey(): string {
    return `${this.prefix}:index`;
  }

  private docKey(name: string): string {
    return `${this.prefix}:doc:${name}`;
  }

  list(): string[] {
    const raw = this.storage.getItem(this.indexKey);
    if (raw === null) {
      return [];
    }
    try {
      const names = JSON.parse(raw) as unknown;
      return Array.isArray(names) ? names.filter((n): n is string => typeof n === "string") : [];
    } catch {
      return [];
    }
  }

  save(name: string, doc: CanvasDocument): void {
    this.storage.setItem(this.docKey(name), JSON.stringify(documentToJson(doc)));
    const names = this.list();
    if (!names.includes(name)) {
      names.push(name);
      this.storage.setItem(this.indexKey, JSON.stringify(names));
    }
  }

  load(name: string): CanvasDocument | null {
    const raw = this.storage.getItem(this.docKey(name));
    if (raw === null) {
      return null;
    }
    let json: StoredDocumentJson;
    try {
      json = JSON.parse(raw) as StoredDocumentJson;
    } catch (err) {
      throw new ParseError(err instanceof Error ? err.message : String(err), `stored document ${name}`);
    }
    return documentFromJson(json);
  }

  remove(name: string): void {
    this.storage.removeItem(this.docKey(name));
    const names = this.list().filter((n) => n !== name);
    this.storage.setItem(this.indexKey, JSON.stringify(names));
  }
}
