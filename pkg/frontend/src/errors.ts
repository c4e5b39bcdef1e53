/** Error types shared across the editor modules. */

/** A document or layout violates one or more invariants. */
export class ValidationError extends Error {
  readonly violations: string[];

  constructor(violations: string | string[]) {
    const list = Array.isArray(violations) ? violations : [violations];
    super(list.join("; "));
    this.name = "ValidationError";
    this.violations = list;
  }
}

/** A layout document is structurally malformed (bad JSON, wrong keys). */
export class ParseError extends Error {
  readonly location: string;

  constructor(message: string, location = "") {
    super(location ? `${location}: ${message}` : message);
    this.name = "ParseError";
    this.location = location;
  }
}

/** An operation referenced a layer id that is not in the document. */
export class UnknownLayerError extends Error {
  readonly layerId: string;

  constructor(layerId: string) {
    super(`unknown layer ${JSON.stringify(layerId)}`);
    this.name = "UnknownLayerError";
    this.layerId = layerId;
  }
}

/** A generation action was requested while another one is in flight. */
export class BusyError extends Error {
  constructor(message = "a generation job is already in flight for this document") {
    super(message);
    this.name = "BusyError";
  }
}
