//! Operator overloads for [`Node`]. Mixing nodes of different graphs panics;
//! [`Graph::apply`](super::Graph::apply) is the checked alternative.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{Node, Primitive};

macro_rules! node_binop {
    ($trait:ident, $method:ident, $prim:expr) => {
        impl $trait<&Node> for &Node {
            type Output = Node;
            fn $method(self, rhs: &Node) -> Node {
                self.binary($prim, rhs)
            }
        }
        impl $trait<Node> for Node {
            type Output = Node;
            fn $method(self, rhs: Node) -> Node {
                self.binary($prim, &rhs)
            }
        }
        impl $trait<&Node> for Node {
            type Output = Node;
            fn $method(self, rhs: &Node) -> Node {
                self.binary($prim, rhs)
            }
        }
        impl $trait<Node> for &Node {
            type Output = Node;
            fn $method(self, rhs: Node) -> Node {
                self.binary($prim, &rhs)
            }
        }
        impl $trait<f64> for &Node {
            type Output = Node;
            fn $method(self, rhs: f64) -> Node {
                self.binary_scalar($prim, rhs, false)
            }
        }
        impl $trait<f64> for Node {
            type Output = Node;
            fn $method(self, rhs: f64) -> Node {
                self.binary_scalar($prim, rhs, false)
            }
        }
        impl $trait<&Node> for f64 {
            type Output = Node;
            fn $method(self, rhs: &Node) -> Node {
                rhs.binary_scalar($prim, self, true)
            }
        }
        impl $trait<Node> for f64 {
            type Output = Node;
            fn $method(self, rhs: Node) -> Node {
                rhs.binary_scalar($prim, self, true)
            }
        }
    };
}

node_binop!(Add, add, Primitive::Add);
node_binop!(Sub, sub, Primitive::Sub);
node_binop!(Mul, mul, Primitive::Mul);
node_binop!(Div, div, Primitive::Div);

impl Neg for &Node {
    type Output = Node;
    fn neg(self) -> Node {
        self.unary_neg()
    }
}

impl Neg for Node {
    type Output = Node;
    fn neg(self) -> Node {
        self.unary_neg()
    }
}

impl Node {
    fn unary_neg(&self) -> Node {
        let i = self.graph.tape_mut().neg(self.index);
        self.graph.wrap(i)
    }
}
